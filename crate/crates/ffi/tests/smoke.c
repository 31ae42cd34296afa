#include <math.h>
#include <stdio.h>
#include "pendular.h"

int main(void) {
    PdPair *pair = NULL;
    if (pd_pair_new("SrO", 0.33, 8.9, 4.4, 6.6, 50.0, 90.0, 2, &pair) != PD_STATUS_OK) {
        return 1;
    }
    PdSiteQubit s1;
    if (pd_pair_site(pair, 1, &s1) != PD_STATUS_OK || fabs(s1.c0 - 0.480) > 0.005) {
        return 2;
    }
    double dw = 0.0;
    pd_pair_delta_omega_mhz(pair, &dw);
    if (pd_pair_site(pair, 3, &s1) != PD_STATUS_CONFIG) {
        return 3;
    }
    char msg[128];
    if (pd_last_error_message(msg, sizeof msg) == 0) {
        return 4;
    }
    double pulse[5] = {0.0, 0.1, 0.2, 0.1, 0.0};
    double re[4] = {1.0, 0.0, 0.0, 0.0}, im[4] = {0.0, 0.0, 0.0, 0.0};
    if (pd_propagate(pair, pulse, 5, 0.25, re, im, 4) != PD_STATUS_OK) {
        return 5;
    }
    double norm = 0.0;
    for (int i = 0; i < 4; i++) norm += re[i] * re[i] + im[i] * im[i];
    pd_pair_free(pair);
    printf("%s %.3f %.12f\n", pd_version(), dw, norm);
    return fabs(norm - 1.0) < 1e-10 ? 0 : 6;
}
