/* Harness helpers. */
static __attribute__((unused)) void pm_constrain_text(const char* buf, unsigned cap, int printable) {
  unsigned i;
  klee_assume(buf[cap - 1] == '\0');
  for (i = 0; i + 1 < cap; i++) {
    if (printable) {
      klee_assume((buf[i] == '\0') | ((buf[i] >= 0x20) & (buf[i] <= 0x7e)));
    }
    if (i > 0) {
      klee_assume((buf[i - 1] != '\0') | (buf[i] == '\0'));
    }
  }
}

static __attribute__((unused)) void pm_constrain_char(char c, int printable) {
  if (printable) {
    klee_assume((c >= 0x20) & (c <= 0x7e));
  }
}

static __attribute__((unused)) void pm_assume_text_eq(const char* sym, unsigned cap, const char* src) {
  unsigned i;
  int ended = src == NULL;
  for (i = 0; i < cap; i++) {
    char c = '\0';
    if (!ended && i + 1 < cap) {
      c = src[i];
      if (c == '\0') {ended = 1;}
    }
    klee_assume(sym[i] == c);
  }
}
