/* Train on a synthetic catalog, save, reload and print a few predictions. */
#include <stdio.h>

#include "prodcat.h"

static int check(ProdcatStatus s, const char *what) {
    if (s != PRODCAT_STATUS_OK) {
        fprintf(stderr, "%s failed (%d): %s\n", what, (int)s, prodcat_last_error());
        return 1;
    }
    return 0;
}

int main(int argc, char **argv) {
    const char *model_path = argc > 1 ? argv[1] : "model.json";
    ProdcatDataset *data = NULL;
    ProdcatModel *model = NULL;
    ProdcatModel *loaded = NULL;
    ProdcatPredictions *preds = NULL;
    int rc = 1;

    if (check(prodcat_dataset_synthesize(300, 5, &data), "synthesize")) goto done;
    if (check(prodcat_model_train(data, NULL, &model), "train")) goto done;
    if (check(prodcat_model_save(model, model_path), "save")) goto done;
    if (check(prodcat_model_load(model_path, &loaded), "load")) goto done;
    if (check(prodcat_predict(loaded, data, &preds), "predict")) goto done;

    for (size_t row = 0; row < 3 && row < prodcat_predictions_len(preds); row++) {
        const char *top = NULL, *bottom = NULL, *color = NULL;
        if (check(prodcat_predictions_label(preds, row, PRODCAT_TARGET_TOP_CATEGORY, &top), "label") ||
            check(prodcat_predictions_label(preds, row, PRODCAT_TARGET_BOTTOM_CATEGORY, &bottom), "label") ||
            check(prodcat_predictions_label(preds, row, PRODCAT_TARGET_COLOR, &color), "label"))
            goto done;
        printf("%zu,%s,%s,%s\n", row, top, bottom, color);
    }
    rc = 0;

done:
    prodcat_predictions_free(preds);
    prodcat_model_free(loaded);
    prodcat_model_free(model);
    prodcat_dataset_free(data);
    return rc;
}
