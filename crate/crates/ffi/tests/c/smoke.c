#include <math.h>
#include <stdio.h>

#include "polaron.h"

int main(void) {
    PolaronModel *m = NULL;
    if (polaron_model_new(-1.0, 1.0, -1.0, 0.0, &m) != POLARON_STATUS_INVALID_PARAMETER) return 1;
    if (polaron_last_error_message() == NULL) return 2;
    if (polaron_model_new(6.283185307179586, 1.0, -1.0, 0.0, &m) != POLARON_STATUS_OK) return 3;
    if (polaron_model_set_cutoff(m, POLARON_CUTOFF_SHARP, 4.0) != POLARON_STATUS_OK) return 4;
    double e = 0.0, r = 0.0;
    if (polaron_two_body_ground(m, &e, &r) != POLARON_STATUS_OK) return 5;
    if (fabs(e + 1.0) > 1e-10) return 6;
    if (polaron_phi_delta(m, -1.0, &e, &r) != POLARON_STATUS_OK || e != 0.0) return 7;
    polaron_model_free(m);
    printf("ok %s\n", polaron_version());
    return 0;
}
