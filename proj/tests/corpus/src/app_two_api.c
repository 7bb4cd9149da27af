/* Imports qv_dh_derive (dead) and qv_rsa_sign (live). */
#include <stdio.h>
#include "toycrypto.h"

__attribute__((noinline, used)) int dead_dh(int x) { return qv_dh_derive(x) + 1; }

__attribute__((noinline)) int live_rsa(int x) { return qv_rsa_sign(x) + 2; }

int main(int argc, char **argv) {
  (void)argv;
  printf("%d\n", live_rsa(argc));
  return 0;
}
