const char *tricky() {
    return R"xy(end )" not yet)xy";
}
