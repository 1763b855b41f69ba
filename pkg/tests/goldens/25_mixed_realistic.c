/* utility module
 * with a header comment
 */
#include <string.h>

#define MAX_LEN 64

static int check_len(const char *s) {
    /* reject overly long { inputs */
    return strlen(s) < MAX_LEN;
}

int copy_if_ok(char *dst, const char *src) {
    if (!check_len(src)) {
        return -1; // too long
    }
    strcpy(dst, src);
    return 0;
}
