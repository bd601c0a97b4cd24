#include <stdio.h>
#include "keyed_sfft.h"

int main(void) {
    uint64_t freqs[2] = {7, 41};
    double re_im[4] = {1.0, 0.0, 1.0, 0.0};
    SfftSignal *signal = NULL;
    SfftConfig *cfg = NULL;
    SfftResult *result = NULL;
    if (sfft_signal_from_spectrum(1001, freqs, re_im, 2, 0, &signal) != SfftStatus_Ok) return 10;
    if (sfft_config_default(&cfg) != SfftStatus_Ok) return 11;
    if (sfft_config_set_moduli(cfg, 7, 11, 13) != SfftStatus_Ok) return 12;
    if (sfft_transform(signal, cfg, 2, 1, &result) != SfftStatus_Ok) return 13;
    size_t n = sfft_result_len(result);
    for (size_t i = 0; i < n; i++) {
        uint64_t f;
        double re, im;
        if (sfft_result_entry(result, i, &f, &re, &im) != SfftStatus_Ok) return 14;
        printf("%llu %.6f %.6f\n", (unsigned long long)f, re, im);
    }
    if (sfft_config_set_moduli(cfg, 6, 9, 13) == SfftStatus_Ok) return 15;
    if (sfft_last_error() == NULL) return 16;
    sfft_result_free(result);
    sfft_config_free(cfg);
    sfft_signal_free(signal);
    return n == 2 ? 0 : 17;
}
