#include <stdio.h>
#define OPEN {
#define CLOSE }

int guarded(void) {
#ifdef DEBUG
    printf("dbg\n");
#endif
    return 1;
}
