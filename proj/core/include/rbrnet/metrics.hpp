#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rbrnet {

/// K x K counts, rows = true class, columns = predicted class.
struct ConfusionMatrix {
    std::vector<std::vector<std::int64_t>> counts;
    std::vector<std::string> class_names;  // optional; size K when set

    std::int64_t k() const { return static_cast<std::int64_t>(counts.size()); }
    std::int64_t total() const;
};

ConfusionMatrix confusion(const std::vector<int>& true_labels, const std::vector<int>& pred_labels,
                          int num_classes);

/// One-vs-rest scalar metrics for a single class. `flagged` marks a
/// zero-denominator metric that was reported as 0.
struct ClassMetrics {
    double sensitivity = 0.0;
    double precision = 0.0;
    double specificity = 0.0;
    double f1 = 0.0;
    bool flagged = false;
};

struct ScalarReport {
    double accuracy_percent = 0.0;  // 100 * trace / total
    std::vector<ClassMetrics> per_class;
    ClassMetrics macro;  // unweighted class mean; flagged if any class is
};

ScalarReport scalar_metrics(const ConfusionMatrix& cm);

/// Harmonic mean of precision and recall; 0 (by convention) when both are 0.
double f1_score(double precision, double recall);

struct CurvePoint {
    double x = 0.0;  // ROC: FPR, PR: recall
    double y = 0.0;  // ROC: TPR, PR: precision
    double threshold = 0.0;
};

struct Curve {
    std::vector<CurvePoint> points;
    double auc = 0.0;
};

/// Threshold sweep over distinct scores descending, tie groups collapsed into
/// one step. AUC is the trapezoid area, accumulated in integers so it equals
/// the Mann-Whitney pair statistic (ties at half credit) bit-for-bit.
Curve roc_curve(const std::vector<double>& scores, const std::vector<bool>& positives);

/// Threshold sweep; AUC integrates precision over recall steps
/// (sum of delta-recall * precision at each threshold). The first point is
/// anchored at recall 0 with the precision of the highest-score group.
Curve pr_curve(const std::vector<double>& scores, const std::vector<bool>& positives);

struct ClassCurves {
    Curve roc;
    Curve pr;
    bool present = true;  // false when the class had no positives or no negatives
};

struct CurveReport {
    std::vector<ClassCurves> per_class;
    double macro_roc_auc = 0.0;  // mean over present classes
    double macro_pr_auc = 0.0;
};

/// One-vs-rest curves per class, using probability column k as the score.
/// Rows of `probs` must lie on the simplex within 1e-5. Classes absent from
/// the labels are flagged and skipped in the macro averages.
CurveReport multiclass_curves(const std::vector<std::vector<double>>& probs,
                              const std::vector<int>& true_labels);

struct EvalReport {
    ConfusionMatrix cm;
    ScalarReport scalars;
    CurveReport curves;
};

EvalReport evaluate(const std::vector<std::vector<double>>& probs,
                    const std::vector<int>& true_labels,
                    const std::vector<std::string>& class_names);

}  // namespace rbrnet
