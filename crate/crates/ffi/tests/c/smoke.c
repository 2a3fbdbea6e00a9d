#include <math.h>
#include <stdio.h>
#include <string.h>

#include "latchsim.h"

static const char *RC =
    ".title rc\n"
    "V1 in 0 PULSE(0 1 0 1n 1n 1 2)\n"
    "R1 in out 1k\n"
    "C1 out 0 1u\n"
    ".tran 1u 5m\n";

int main(void) {
    LatchsimCircuit *c = NULL;
    if (latchsim_circuit_parse(RC, NULL, NULL, 0, &c) != LATCHSIM_STATUS_OK) {
        fprintf(stderr, "parse: %s\n", latchsim_last_error());
        return 1;
    }
    LatchsimWaveforms *w = NULL;
    if (latchsim_simulate(c, -1.0, 0.0, &w) != LATCHSIM_STATUS_OK) {
        fprintf(stderr, "simulate: %s\n", latchsim_last_error());
        return 1;
    }
    size_t n = latchsim_waveforms_len(w);
    const double *t = latchsim_waveforms_time(w);
    const double *v = NULL;
    if (latchsim_waveforms_signal(w, "v(out)", &v) != LATCHSIM_STATUS_OK) {
        return 1;
    }
    double expect = 1.0 - exp(-t[n - 1] / 1e-3);
    printf("points=%zu t_end=%g v_end=%.6f expect=%.6f\n", n, t[n - 1], v[n - 1], expect);
    if (fabs(v[n - 1] - expect) > 5e-3) {
        return 1;
    }

    LatchsimCircuit *bad = NULL;
    LatchsimStatus s = latchsim_circuit_parse(".title x\nR1 a 0 1.2.3k\n", NULL, NULL, 0, &bad);
    if (s != LATCHSIM_STATUS_PARSE || bad != NULL || strstr(latchsim_last_error(), "line 2") == NULL) {
        return 1;
    }

    LatchsimOffTimeParams p = {10e3, 1e-6, 8.8, 2.1, 10e3, 10e-6, 10.0, 5.0};
    LatchsimOffTime off;
    if (latchsim_off_time(&p, &off) != LATCHSIM_STATUS_OK || fabs(off.total - 83.643e-3) > 1e-6) {
        return 1;
    }
    printf("off_time=%.6f\n", off.total);

    latchsim_waveforms_free(w);
    latchsim_circuit_free(c);
    return 0;
}
