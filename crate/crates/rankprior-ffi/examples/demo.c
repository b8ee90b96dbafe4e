/*
 * Minimal C consumer of the rankprior C ABI. From the repository root:
 *
 *     cargo build -p rankprior-ffi
 *     cc -std=c11 -Wall crates/rankprior-ffi/examples/demo.c \
 *        -Icrates/rankprior-ffi/include \
 *        target/debug/librankprior_ffi.a -lpthread -ldl -lm -o demo
 *     ./demo
 *
 * (Link target/debug/librankprior_ffi.so instead if you prefer dynamic
 * linking; then librankprior_ffi.so must be on the runtime library path.)
 */
#include <assert.h>
#include <math.h>
#include <stdio.h>
#include <string.h>
#include "rankprior.h"

int main(void) {
    RpPrior *prior = NULL;
    RpStatus st = rp_prior_from_json("{\"family\": \"normal\", \"params\": {\"tau\": 1.0}}", &prior);
    assert(st == RP_STATUS_OK);
    assert(strcmp(rp_prior_family(prior), "normal") == 0);

    double mean = 0.0;
    st = rp_posterior_mean(prior, 1.1, 0.05, &mean);
    assert(st == RP_STATUS_OK);
    assert(fabs(mean - 1.1 / 1.0025) < 1e-12);

    double x[4] = {0.4, 2.0, -1.0, 1.5};
    double sigma[4] = {0.1, 0.2, 0.3, 0.05};
    size_t order[4];
    double scores[4];
    st = rp_rank(prior, x, sigma, 4, order, scores);
    assert(st == RP_STATUS_OK);
    assert(order[0] == 1 && order[3] == 2);
    for (int k = 1; k < 4; k++) assert(scores[k] <= scores[k - 1]);

    double rate = 0.0;
    double tail_x[5] = {2.4026, 3.2026, 1.8026, 2.7026, 4.3026};
    double tail_s[5] = {0.1, 0.3, 0.2, 0.2, 0.15};
    st = rp_fit_tail(tail_x, tail_s, 5, 2.302585092994046, RP_TAIL_FAMILY_EXPONENTIAL, &rate);
    assert(st == RP_STATUS_OK);
    assert(rate > 0.5 && rate < 3.0);

    st = rp_posterior_mean(prior, 1.0, -1.0, &mean);
    assert(st == RP_STATUS_INVALID_ARGUMENT);
    assert(strlen(rp_last_error_message()) > 0);

    char *json = NULL;
    st = rp_prior_to_json(prior, &json);
    assert(st == RP_STATUS_OK);
    assert(strstr(json, "\"tau\"") != NULL);
    rp_string_free(json);
    rp_prior_free(prior);

    printf("C smoke test passed (library version %s)\n", rp_version());
    return 0;
}
