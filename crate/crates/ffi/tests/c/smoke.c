#include <stdio.h>
#include <string.h>
#include "eiacc.h"

int main(void) {
    EiaccAccumulator *acc = NULL;
    if (eiacc_accumulator_new(1, 3, 12, &acc) != EIACC_STATUS_OK) return 1;
    uint64_t codes[] = {0x3F80, 0x3F80, 0x3F00};
    if (eiacc_accumulator_add(acc, codes, 3, NULL) != EIACC_STATUS_OK) return 2;
    double v = 0;
    char *text = NULL;
    if (eiacc_accumulator_reconstruct(acc, EIACC_STRATEGY_EXACT_RANGE, 0, &v, &text) != EIACC_STATUS_OK) return 3;
    int ok = v == 2.5 && strcmp(text, "+5 * 2^-1") == 0;
    printf("%s %g\n", text, v);
    eiacc_string_free(text);
    eiacc_accumulator_free(acc);

    EiaccMac *mac = NULL;
    if (eiacc_mac_new(42, 0, 12, &mac) != EIACC_STATUS_INVALID_ARGUMENT) return 4;
    if (eiacc_last_error() == NULL) return 5;
    return ok ? 0 : 6;
}
