int main(void) {
    char x0[6];
    klee_make_symbolic(&x0, sizeof(x0), "x0");
    pm_constrain_text(x0, sizeof(x0), 1);
    uint32_t x1;
    klee_make_symbolic(&x1, sizeof(x1), "x1");
    klee_assume(x1 < 7);
    char x2[6];
    klee_make_symbolic(&x2, sizeof(x2), "x2");
    pm_constrain_text(x2, sizeof(x2), 1);
    char x3[4];
    klee_make_symbolic(&x3, sizeof(x3), "x3");
    pm_constrain_text(x3, sizeof(x3), 1);
    RR in1;
    in1.rtyp = (RecordType)x1;
    memcpy(in1.name, x2, sizeof(x2));
    memcpy(in1.rdat, x3, sizeof(x3));
    bool result_tmp;
    uint8_t x4;
    klee_make_symbolic(&x4, sizeof(x4), "x4");
    bool bad_input;
    uint8_t x5;
    klee_make_symbolic(&x5, sizeof(x5), "x5");
    if (valid_query(x0)) {
        bad_input = false;
        result_tmp = record_applies(x0, in1);
    }
    else {
        bad_input = true;
        result_tmp = false;
    }
    klee_assume(result_tmp == x4);
    klee_assume(bad_input == x5);
    return 0;
}
