#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "selfseg/dataset.hpp"

namespace selfseg {

// 2|P n G| / (|P| + |G|) for one class; 1.0 when both sets are empty.
double dice(const LabelMap& pred, const LabelMap& gt, Label cls = Label::Cyst);

// Percentage of mask pixels labeled Cyst.
double cyst_score(const LabelMap& labels, const LungMask& mask);

// Absolute difference of cyst scores.
double adcs(const LabelMap& pred, const LabelMap& gt, const LungMask& mask);

struct EvalRow {
  std::string image;
  double dice = 0.0;
  double score_pred = 0.0;
  double score_gt = 0.0;
  double adcs = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  // Names of images skipped for lacking ground truth or mask.
  std::vector<std::string> skipped;

  double mean_dice() const;
  double mean_adcs() const;
  EvalRow mean_row() const;
};

// Evaluates the test entries of the manifest that have a prediction in
// `preds` (keyed by image_key). Entries without ground truth or mask are
// listed in `skipped`.
EvalReport evaluate(const Manifest& manifest, const std::map<std::string, LabelMap>& preds);

// `image,dice,score_pred,score_gt,adcs`, one row per image, then `mean`.
void write_eval_csv(const EvalReport& report, std::ostream& out);

// Fixed-precision decimal used in every CSV the tools emit.
std::string format_number(double v);

}  // namespace selfseg
