#include <math.h>
#include <stdio.h>
#include <string.h>

#include "artfid.h"

#define CHECK(expr)                                                        \
    do {                                                                   \
        ArtfidStatus s_ = (expr);                                          \
        if (s_ != ARTFID_STATUS_OK) {                                      \
            fprintf(stderr, "%s -> %d: %s\n", #expr, (int)s_,              \
                    artfid_last_error_message());                          \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(void) {
    double a[] = {1, 0, -1, 0, 0, 1, 0, -1};
    double b[] = {3, 0, 1, 0, 2, 1, 2, -1};
    ArtfidEmbeddings *ea = NULL, *eb = NULL;
    double fid = -1.0;

    CHECK(artfid_embeddings_new(a, 4, 2, "a", &ea));
    CHECK(artfid_embeddings_new(b, 4, 2, NULL, &eb));
    CHECK(artfid_fid(ea, eb, &fid));
    /* Same covariance, means differ by (2, 0). */
    if (fabs(fid - 4.0) > 1e-12) {
        fprintf(stderr, "fid = %.17g\n", fid);
        return 1;
    }

    if (artfid_fid(ea, NULL, &fid) != ARTFID_STATUS_NULL_POINTER) return 1;
    if (strcmp(artfid_last_error_kind(), "NullPointer") != 0) return 1;

    uint64_t wins[] = {0, 3, 1, 0};
    ArtfidComparisons *w = NULL;
    double gamma[2];
    CHECK(artfid_comparisons_new(wins, 2, &w));
    CHECK(artfid_bradley_terry(w, 1e-12, 10000, gamma, 2, NULL));
    if (fabs(gamma[0] - 0.75) > 1e-9) return 1;

    artfid_comparisons_free(w);
    artfid_embeddings_free(ea);
    artfid_embeddings_free(eb);
    printf("ok %s\n", artfid_version());
    return 0;
}
