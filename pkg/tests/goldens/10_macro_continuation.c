#define LONG_MACRO(x) \
    do { (x)++; } \
    while (0)

int uses_macro(int v) {
    LONG_MACRO(v);
    return v;
}
