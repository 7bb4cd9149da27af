/* Toy crypto library: exports three quantum-vulnerable and two quantum-safe
 * entry points. Bodies are stubs; only the symbol surface matters. */
volatile int toy_state;

int qv_rsa_sign(int x) { toy_state += x * 3 + 1; return toy_state; }
int qv_ecdsa_sign(int x) { toy_state ^= x + 7; return toy_state; }
int qv_dh_derive(int x) { toy_state -= x * 5 + 2; return toy_state; }
int safe_sha512(int x) { toy_state |= x + 11; return toy_state; }
int safe_aes256(int x) { toy_state &= x + 13; return toy_state; }
