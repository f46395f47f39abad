#include <stdio.h>
#include <string.h>
#include <assert.h>
#include "scltl_planner.h"

static const char *MAP =
  "{\"grid\": {\"width\": 3, \"height\": 1},"
  " \"alphabet\": [\"A\"],"
  " \"start\": [0, 0],"
  " \"belief\": [{\"cell\": [2, 0], \"letters\":"
  "   [{\"set\": [\"A\"], \"p\": 0.5}, {\"set\": [], \"p\": 0.5}]}],"
  " \"truth\": [{\"cell\": [2, 0], \"set\": [\"A\"]}]}";

int main(void) {
  printf("version: %s\n", sclp_version());

  char *dfa_json = NULL;
  SclpStatus st = sclp_compile("F (A & F A)", "A", &dfa_json);
  assert(st == SCLP_STATUS_OK);
  assert(strstr(dfa_json, "\"states\"") != NULL);
  sclp_string_free(dfa_json);

  st = sclp_compile("X A", "A", &dfa_json);
  assert(st == SCLP_STATUS_FORMULA_ERROR);
  printf("expected error: %s\n", sclp_last_error_message());

  SclpSession *session = NULL;
  st = sclp_session_new(MAP, "F A", 0.99, 1.0, 0.01, &session);
  assert(st == SCLP_STATUS_OK && session != NULL);

  char *plan_json = NULL;
  st = sclp_session_plan(session, &plan_json);
  assert(st == SCLP_STATUS_OK);
  assert(strstr(plan_json, "\"satisfying\": true") != NULL);
  sclp_string_free(plan_json);

  char *trace_json = NULL;
  st = sclp_session_run(session, 0, 1, 0, 0, false, &trace_json);
  assert(st == SCLP_STATUS_OK);
  assert(strstr(trace_json, "\"outcome\": \"accepted\"") != NULL);
  printf("trace ok\n");
  sclp_string_free(trace_json);

  sclp_session_free(session);
  printf("C smoke test passed\n");
  return 0;
}
