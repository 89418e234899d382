#include <stdio.h>
#include <string.h>
#include "cqbem.h"

int main(void) {
    CqbemConfig *cfg = NULL;
    if (cqbem_config_parse("bc.kind = Q", NULL, &cfg) != CQBEM_STATUS_CONFIG || cfg != NULL)
        return 1;
    if (cqbem_last_error() == NULL || strlen(cqbem_last_error()) == 0)
        return 2;
    if (cqbem_config_parse("reference.steps = 256\n", NULL, &cfg) != CQBEM_STATUS_OK)
        return 3;
    double u[257];
    size_t written = 0;
    if (cqbem_reference_field(cfg, u, 257, &written) != CQBEM_STATUS_OK || written != 257)
        return 4;
    double peak = 0.0;
    for (size_t i = 0; i < written; i++)
        if (u[i] > peak || -u[i] > peak)
            peak = u[i] > 0 ? u[i] : -u[i];
    cqbem_config_free(cfg);
    printf("%s %.6f\n", cqbem_version(), peak);
    return peak > 0.0 ? 0 : 5;
}
