#include <stdio.h>
#include <string.h>

#include "selshot.h"

int main(void) {
    char *json = NULL;
    if (selshot_extract_entities("print(os.listdir(dname))", "python", &json) != SELSHOT_STATUS_OK) {
        fprintf(stderr, "extract: %s\n", selshot_last_error_message());
        return 1;
    }
    if (strstr(json, "\"library\":[\"os\"]") == NULL) {
        fprintf(stderr, "unexpected entities %s\n", json);
        return 1;
    }
    selshot_string_free(json);

    SelshotScores scores;
    if (selshot_metric_scores("list the files", "list the files", &scores) != SELSHOT_STATUS_OK || scores.bleu != 1.0) {
        return 1;
    }
    if (selshot_metric_scores("x", "", &scores) != SELSHOT_STATUS_VALIDATION || selshot_last_error_message() == NULL) {
        return 1;
    }
    printf("ok %s\n", selshot_version());
    return 0;
}
