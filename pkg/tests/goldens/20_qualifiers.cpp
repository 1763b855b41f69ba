struct Counter {
    int n;
};

int read_counter(const Counter &c) noexcept {
    return c.n;
}
