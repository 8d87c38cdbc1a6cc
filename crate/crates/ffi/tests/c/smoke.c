#include <math.h>
#include <stdio.h>
#include <string.h>

#include "ncvn.h"

static int fail(const char *what) {
    const char *msg = ncvn_last_error();
    fprintf(stderr, "%s: %s\n", what, msg ? msg : "(no message)");
    return 1;
}

int main(void) {
    NcvnPoly *q = NULL;
    if (ncvn_poly_parse("x'*x + 1 - x*x'", 1, &q) != NCVN_STATUS_OK) return fail("parse");

    double value = 0.0;
    NcvnTuple *argmax = NULL;
    if (ncvn_maximize(q, "contraction", 2, 8, 7, &value, &argmax) != NCVN_STATUS_OK) return fail("maximize");
    if (fabs(value - 2.0) > 1e-6) return fail("value");

    double norm = 0.0;
    if (ncvn_evaluate_norm(q, argmax, &norm) != NCVN_STATUS_OK) return fail("evaluate");
    if (fabs(norm - value) > 1e-9) return fail("argmax value");

    double re[9] = {0, 1, 0, 0, 0, 1, 0, 0, 0};
    double im[9] = {0};
    double w = 0.0;
    if (ncvn_numerical_radius(3, re, im, &w) != NCVN_STATUS_OK) return fail("radius");
    if (fabs(w - sqrt(0.5)) > 1e-9) return fail("radius value");

    NcvnPoly *bad = NULL;
    if (ncvn_poly_parse("x +", 1, &bad) != NCVN_STATUS_PARSE) return fail("bad parse accepted");
    if (ncvn_last_error() == NULL) return fail("missing message");

    char *text = ncvn_poly_to_string(q);
    printf("%s %s %.9f %.9f\n", ncvn_version(), text, value, w);
    ncvn_string_free(text);
    ncvn_tuple_free(argmax);
    ncvn_poly_free(q);
    return 0;
}
