#include <stdio.h>
#include "mid.h"

__attribute__((noinline)) int do_crypto(int x) { return mid_dh_derive(x) * 2; }

int main(int argc, char **argv) {
  (void)argv;
  printf("%d\n", do_crypto(argc));
  return 0;
}
