int declared_only(int a);
void also_declared(void);

int defined_here(int a) {
    return a;
}
