/* Minimal C client: Gaussian through a lens, then a counting run. */
#include <stdio.h>
#include "airy.h"

static int check(AiryStatus s, const char *what) {
    if (s != AIRY_STATUS_OK) {
        char msg[256];
        airy_last_error_message(msg, sizeof msg);
        fprintf(stderr, "%s failed (%d): %s\n", what, (int)s, msg);
        return 1;
    }
    return 0;
}

int main(void) {
    AiryField *f = NULL;
    double p0 = 0.0, p1 = 0.0;
    if (check(airy_gaussian_mode(128, 20e-6, 1554.7e-9, 0.4e-3, &f), "gaussian")) return 1;
    if (check(airy_field_power(f, &p0), "power")) return 1;
    if (check(airy_field_propagate(f, 0.2, AIRY_PROPAGATOR_ANGULAR_SPECTRUM), "propagate")) return 1;
    if (check(airy_field_power(f, &p1), "power")) return 1;
    airy_field_free(f);

    AiryCountingParams cp = {1.0 / 69.0, 10e6, 1e-9, 100000000ULL, AIRY_PAIR_STATISTICS_POISSON,
                             0.05, 0.05, 100.0, 100.0};
    double car = 0.0;
    if (check(airy_analytic_car(&cp, &car), "analytic_car")) return 1;

    if (airy_field_power(NULL, &p1) != AIRY_STATUS_NULL_POINTER) return 2;
    printf("airy %s power %.12f -> %.12f car %.3f\n", airy_version(), p0, p1, car);
    return 0;
}
