int broken(void) {
    if (1) {
    return 0;
}
