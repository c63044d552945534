#include "rbrnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rbrnet/errors.hpp"

namespace rbrnet {

namespace {

// Rate with the zero-denominator convention: 0, flagged.
double rate(std::int64_t num, std::int64_t den, bool& flagged) {
    if (den == 0) {
        flagged = true;
        return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
}

struct SweepGroup {
    double score;
    std::int64_t tp_delta;
    std::int64_t fp_delta;
};

std::vector<SweepGroup> tie_groups(const std::vector<double>& scores,
                                   const std::vector<bool>& positives) {
    if (scores.size() != positives.size()) {
        throw ValueError("curve: scores and positives differ in length");
    }
    std::vector<std::size_t> ix(scores.size());
    std::iota(ix.begin(), ix.end(), 0);
    std::stable_sort(ix.begin(), ix.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::vector<SweepGroup> groups;
    std::size_t i = 0;
    while (i < ix.size()) {
        const double s = scores[ix[i]];
        SweepGroup g{s, 0, 0};
        while (i < ix.size() && scores[ix[i]] == s) {
            if (positives[ix[i]]) {
                g.tp_delta++;
            } else {
                g.fp_delta++;
            }
            ++i;
        }
        groups.push_back(g);
    }
    return groups;
}

}  // namespace

std::int64_t ConfusionMatrix::total() const {
    std::int64_t n = 0;
    for (const auto& row : counts) {
        for (std::int64_t c : row) n += c;
    }
    return n;
}

ConfusionMatrix confusion(const std::vector<int>& true_labels, const std::vector<int>& pred_labels,
                          int num_classes) {
    if (true_labels.size() != pred_labels.size()) {
        throw ValueError("confusion: label lists differ in length");
    }
    if (num_classes < 1) throw ValueError("confusion: need at least one class");
    ConfusionMatrix cm;
    cm.counts.assign(static_cast<std::size_t>(num_classes),
                     std::vector<std::int64_t>(static_cast<std::size_t>(num_classes), 0));
    for (std::size_t i = 0; i < true_labels.size(); ++i) {
        const int t = true_labels[i], p = pred_labels[i];
        if (t < 0 || t >= num_classes || p < 0 || p >= num_classes) {
            throw ValueError("confusion: label out of range at sample " + std::to_string(i));
        }
        cm.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)]++;
    }
    return cm;
}

double f1_score(double precision, double recall) {
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

ScalarReport scalar_metrics(const ConfusionMatrix& cm) {
    const std::int64_t k = cm.k();
    const std::int64_t total = cm.total();
    if (k == 0 || total == 0) throw ValueError("scalar_metrics: empty confusion matrix");

    ScalarReport report;
    std::int64_t trace = 0;
    for (std::int64_t c = 0; c < k; ++c) trace += cm.counts[c][c];
    report.accuracy_percent = 100.0 * static_cast<double>(trace) / static_cast<double>(total);

    for (std::int64_t c = 0; c < k; ++c) {
        std::int64_t tp = cm.counts[c][c];
        std::int64_t fn = 0, fp = 0;
        for (std::int64_t j = 0; j < k; ++j) {
            if (j == c) continue;
            fn += cm.counts[c][j];
            fp += cm.counts[j][c];
        }
        const std::int64_t tn = total - tp - fn - fp;
        ClassMetrics m;
        m.sensitivity = rate(tp, tp + fn, m.flagged);
        m.precision = rate(tp, tp + fp, m.flagged);
        m.specificity = rate(tn, tn + fp, m.flagged);
        m.f1 = f1_score(m.precision, m.sensitivity);
        if (m.precision + m.sensitivity == 0.0) m.flagged = true;
        report.per_class.push_back(m);
    }
    for (const auto& m : report.per_class) {
        report.macro.sensitivity += m.sensitivity;
        report.macro.precision += m.precision;
        report.macro.specificity += m.specificity;
        report.macro.f1 += m.f1;
        report.macro.flagged = report.macro.flagged || m.flagged;
    }
    const double inv_k = 1.0 / static_cast<double>(k);
    report.macro.sensitivity *= inv_k;
    report.macro.precision *= inv_k;
    report.macro.specificity *= inv_k;
    report.macro.f1 *= inv_k;
    return report;
}

Curve roc_curve(const std::vector<double>& scores, const std::vector<bool>& positives) {
    const auto groups = tie_groups(scores, positives);
    std::int64_t pos = 0, neg = 0;
    for (const auto& g : groups) {
        pos += g.tp_delta;
        neg += g.fp_delta;
    }
    if (pos == 0 || neg == 0) {
        throw CurveError("roc_curve: need at least one positive and one negative");
    }
    Curve curve;
    curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    std::int64_t tp = 0, fp = 0;
    std::int64_t auc_num = 0;  // sum of dFP * (TP_prev + TP_cur); exact integers
    for (const auto& g : groups) {
        const std::int64_t tp_prev = tp;
        tp += g.tp_delta;
        fp += g.fp_delta;
        auc_num += g.fp_delta * (tp_prev + tp);
        curve.points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                                static_cast<double>(tp) / static_cast<double>(pos), g.score});
    }
    curve.auc = static_cast<double>(auc_num) /
                (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
    return curve;
}

Curve pr_curve(const std::vector<double>& scores, const std::vector<bool>& positives) {
    const auto groups = tie_groups(scores, positives);
    std::int64_t pos = 0;
    for (const auto& g : groups) pos += g.tp_delta;
    if (pos == 0) throw CurveError("pr_curve: need at least one positive");

    Curve curve;
    std::int64_t tp = 0, fp = 0;
    double auc = 0.0;
    double prev_recall = 0.0;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        tp += groups[i].tp_delta;
        fp += groups[i].fp_delta;
        const double recall = static_cast<double>(tp) / static_cast<double>(pos);
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        if (i == 0) {
            curve.points.push_back({0.0, precision, std::numeric_limits<double>::infinity()});
        }
        curve.points.push_back({recall, precision, groups[i].score});
        auc += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    curve.auc = auc;
    return curve;
}

CurveReport multiclass_curves(const std::vector<std::vector<double>>& probs,
                              const std::vector<int>& true_labels) {
    if (probs.size() != true_labels.size()) {
        throw ValueError("multiclass_curves: probs and labels differ in length");
    }
    if (probs.empty()) throw ValueError("multiclass_curves: no samples");
    const std::size_t k = probs[0].size();
    for (const auto& row : probs) {
        if (row.size() != k) throw ValueError("multiclass_curves: ragged probability rows");
        double s = 0.0;
        for (double p : row) s += p;
        if (std::abs(s - 1.0) > 1e-5) {
            throw ValueError("multiclass_curves: probability row off the simplex");
        }
    }
    CurveReport report;
    report.per_class.resize(k);
    std::size_t present = 0;
    for (std::size_t c = 0; c < k; ++c) {
        std::vector<double> scores(probs.size());
        std::vector<bool> positives(probs.size());
        std::int64_t pos = 0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            scores[i] = probs[i][c];
            positives[i] = true_labels[i] == static_cast<int>(c);
            pos += positives[i] ? 1 : 0;
        }
        const std::int64_t neg = static_cast<std::int64_t>(probs.size()) - pos;
        if (pos == 0 || neg == 0) {
            report.per_class[c].present = false;
            continue;
        }
        report.per_class[c].roc = roc_curve(scores, positives);
        report.per_class[c].pr = pr_curve(scores, positives);
        report.macro_roc_auc += report.per_class[c].roc.auc;
        report.macro_pr_auc += report.per_class[c].pr.auc;
        ++present;
    }
    if (present > 0) {
        report.macro_roc_auc /= static_cast<double>(present);
        report.macro_pr_auc /= static_cast<double>(present);
    }
    return report;
}

EvalReport evaluate(const std::vector<std::vector<double>>& probs,
                    const std::vector<int>& true_labels,
                    const std::vector<std::string>& class_names) {
    std::vector<int> preds(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
        preds[i] = static_cast<int>(
            std::max_element(probs[i].begin(), probs[i].end()) - probs[i].begin());
    }
    EvalReport report;
    report.cm = confusion(true_labels, preds, static_cast<int>(class_names.size()));
    report.cm.class_names = class_names;
    report.scalars = scalar_metrics(report.cm);
    report.curves = multiclass_curves(probs, true_labels);
    return report;
}

}  // namespace rbrnet
