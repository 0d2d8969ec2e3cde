#include "selfseg/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "selfseg/error.hpp"

namespace selfseg {

double dice(const LabelMap& pred, const LabelMap& gt, Label cls) {
  if (pred.width() != gt.width() || pred.height() != gt.height()) throw dimension_error("dice: dimension mismatch");
  std::size_t p = 0, g = 0, both = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool in_p = pred[i] == cls, in_g = gt[i] == cls;
    p += in_p;
    g += in_g;
    both += in_p && in_g;
  }
  if (p + g == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(p + g);
}

double cyst_score(const LabelMap& labels, const LungMask& mask) {
  if (labels.width() != mask.width() || labels.height() != mask.height()) {
    throw dimension_error("cyst_score: dimension mismatch");
  }
  std::size_t lung = 0, cyst = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!mask[i]) continue;
    ++lung;
    cyst += labels[i] == Label::Cyst;
  }
  if (lung == 0) throw invalid_error("cyst_score: empty lung mask");
  return 100.0 * static_cast<double>(cyst) / static_cast<double>(lung);
}

double adcs(const LabelMap& pred, const LabelMap& gt, const LungMask& mask) {
  return std::abs(cyst_score(pred, mask) - cyst_score(gt, mask));
}

double EvalReport::mean_dice() const { return mean_row().dice; }
double EvalReport::mean_adcs() const { return mean_row().adcs; }

EvalRow EvalReport::mean_row() const {
  EvalRow m{"mean", 0.0, 0.0, 0.0, 0.0};
  if (rows.empty()) return m;
  for (const auto& r : rows) {
    m.dice += r.dice;
    m.score_pred += r.score_pred;
    m.score_gt += r.score_gt;
    m.adcs += r.adcs;
  }
  const double n = static_cast<double>(rows.size());
  m.dice /= n;
  m.score_pred /= n;
  m.score_gt /= n;
  m.adcs /= n;
  return m;
}

EvalReport evaluate(const Manifest& manifest, const std::map<std::string, LabelMap>& preds) {
  EvalReport report;
  for (const auto* e : manifest.split(Split::Test)) {
    const std::string key = image_key(*e);
    const auto it = preds.find(key);
    if (it == preds.end()) continue;
    if (!e->ground_truth || !e->mask) {
      report.skipped.push_back(key);
      continue;
    }
    const LabelMap gt = load_labelmap(*e->ground_truth);
    const LungMask mask = load_mask(*e->mask);
    const double sp = cyst_score(it->second, mask);
    const double sg = cyst_score(gt, mask);
    report.rows.push_back({key, dice(it->second, gt), sp, sg, std::abs(sp - sg)});
  }
  return report;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void write_eval_csv(const EvalReport& report, std::ostream& out) {
  out << "image,dice,score_pred,score_gt,adcs\n";
  auto row = [&](const EvalRow& r) {
    out << r.image << ',' << format_number(r.dice) << ',' << format_number(r.score_pred) << ','
        << format_number(r.score_gt) << ',' << format_number(r.adcs) << '\n';
  };
  for (const auto& r : report.rows) row(r);
  row(report.mean_row());
}

}  // namespace selfseg
