int first(void) {
    // } this close brace is commented out
    return 1;
}

int second(void) {
    /* { */
    return 2;
}

int third(void) {
    return 3;
}
