#include <stdio.h>
#include <stdlib.h>

#include "nary.h"

#define CHECK(call)                                                   \
    do {                                                              \
        NaryStatus s_ = (call);                                       \
        if (s_ != NARY_STATUS_OK) {                                   \
            fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_,         \
                    nary_last_error());                               \
            return 1;                                                 \
        }                                                             \
    } while (0)

int main(void) {
    NaryMatrix *raw = NULL, *x = NULL;
    NaryModel *model = NULL;
    NaryCodes *codes = NULL;
    NaryIndex *index = NULL;
    size_t ids[4 * 5];
    size_t lens[4];

    CHECK(nary_matrix_generate(11, 16, 400, 6, 0.1, &raw));
    CHECK(nary_matrix_preprocess(raw, raw, 1, &x));
    CHECK(nary_model_train(x, NARY_METHOD_LSQ_BINARY, 16, 1, 1.0, 10, 1, &model));
    CHECK(nary_model_encode(model, x, &codes));
    CHECK(nary_index_build(codes, 4, &index));

    double q[16 * 4];
    double *all = malloc(sizeof(double) * 16 * 400);
    CHECK(nary_matrix_copy_values(x, all, 16 * 400));
    for (int i = 0; i < 16 * 4; i++) q[i] = all[i];
    free(all);
    NaryMatrix *queries = NULL;
    CHECK(nary_matrix_new(16, 4, q, &queries));
    CHECK(nary_index_query(index, model, queries, 5, ids, lens));
    for (int i = 0; i < 4; i++) {
        if (lens[i] != 5) return 2;
        printf("%zu", ids[i * 5]);
        putchar(i == 3 ? '\n' : ' ');
    }

    if (nary_model_train(x, NARY_METHOD_ITQ, 64, 1, 1.0, 10, 1, &model) != NARY_STATUS_INVALID_ARGUMENT)
        return 3;

    nary_matrix_free(queries);
    nary_index_free(index);
    nary_codes_free(codes);
    nary_model_free(model);
    nary_matrix_free(x);
    nary_matrix_free(raw);
    return 0;
}
