const char *banner(void) {
    return "{ not a brace }";
}
