#include <stdio.h>
#include <string.h>
#include "jacobi_decay.h"

int main(void) {
    JdModel *m = NULL;
    if (jd_model_from_json("{\"type\":\"example1\",\"c1\":3,\"c2\":1}", &m) != JD_STATUS_OK) return 1;
    double re[64], im[64];
    if (jd_resolvent_column(m, 64, 0.5, 0.0, re, im) != JD_STATUS_OK) return 2;
    size_t count = 0;
    if (jd_sturm_count(m, 1, 64, 0.0, &count) != JD_STATUS_OK) return 3;
    if (jd_model_from_json("{\"type\":\"nope\"}", &m) != JD_STATUS_INVALID_MODEL) return 4;
    char buf[256];
    if (jd_last_error_message(buf, sizeof buf) == 0 || strlen(buf) == 0) return 5;
    jd_model_free(m);
    printf("%zu %.17g\n", count, re[0]);
    return 0;
}
