/* Two-level chirped transfer through the C interface.
 *
 *   cargo build --release -p scalar-ensemble-ffi
 *   cc -Icrates/ffi/include crates/ffi/examples/transfer.c \
 *      target/release/libscalar_ensemble_ffi.a -lm -lpthread -ldl -o transfer
 */
#include <stdio.h>

#include "scalar_ensemble.h"

static int fail(SeStatus st) {
    fprintf(stderr, "status %d: %s\n", (int)st, se_last_error());
    return 1;
}

int main(void) {
    const double lambda[2] = {-0.5, 0.5};
    const double coupling[4] = {0.0, 1.0, 1.0, 0.0};
    SeSystem *sys = NULL;
    SePulse *pulse = NULL;
    double re[2], im[2], drift, d;
    SeStatus st;

    if ((st = se_system_new(2, lambda, coupling, &sys)) != SE_STATUS_OK) return fail(st);
    if ((st = se_pulse_standard(0.5, 1.5, 0.1, 0.02, &pulse)) != SE_STATUS_OK) return fail(st);
    if ((st = se_propagate(sys, pulse, 0, 50, re, im, 2, &drift)) != SE_STATUS_OK) return fail(st);
    if ((st = se_distance_to_target(re, im, 2, 1, &d)) != SE_STATUS_OK) return fail(st);

    printf("horizon %.1f  distance to e_2 %.3e  norm drift %.1e\n", se_pulse_horizon(pulse), d, drift);
    se_pulse_free(pulse);
    se_system_free(sys);
    return 0;
}
