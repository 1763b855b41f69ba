const char *pattern() {
    return R"(brace { inside })";
}

int after_raw(void) {
    return 1;
}
