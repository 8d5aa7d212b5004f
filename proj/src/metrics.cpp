#include "ftlab/metrics.hpp"

#include <string>

namespace ftlab {

ConfusionMatrix::ConfusionMatrix(int num_classes) : c_(num_classes) {
    if (num_classes < 2) throw DataError("confusion matrix needs at least 2 classes");
    counts_.assign(static_cast<size_t>(c_) * c_, 0);
}

int64_t ConfusionMatrix::total() const {
    int64_t t = 0;
    for (int64_t v : counts_) t += v;
    return t;
}

int64_t ConfusionMatrix::row_sum(int truth) const {
    int64_t t = 0;
    for (int j = 0; j < c_; ++j) t += at(truth, j);
    return t;
}

int64_t ConfusionMatrix::col_sum(int pred) const {
    int64_t t = 0;
    for (int i = 0; i < c_; ++i) t += at(i, pred);
    return t;
}

int64_t ConfusionMatrix::trace() const {
    int64_t t = 0;
    for (int i = 0; i < c_; ++i) t += at(i, i);
    return t;
}

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted, int num_classes) {
    if (truth.size() != predicted.size()) {
        throw DataError("confusion: " + std::to_string(truth.size()) + " labels vs " +
                        std::to_string(predicted.size()) + " predictions");
    }
    ConfusionMatrix cm(num_classes);
    for (size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] < 0 || truth[i] >= num_classes || predicted[i] < 0 || predicted[i] >= num_classes) {
            throw DataError("confusion: label out of range at index " + std::to_string(i));
        }
        cm.at(truth[i], predicted[i]) += 1;
    }
    return cm;
}

namespace {

// 0 on a zero denominator, with the flag set.
double safe_div(int64_t num, int64_t den, bool& degenerate) {
    if (den == 0) {
        degenerate = true;
        return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
}

double f1_of(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

ClassMetrics one_vs_rest(const ConfusionMatrix& cm, int cls) {
    ClassMetrics m;
    const int64_t tp = cm.at(cls, cls);
    m.precision = safe_div(tp, cm.col_sum(cls), m.degenerate);
    m.recall = safe_div(tp, cm.row_sum(cls), m.degenerate);
    m.f1 = f1_of(m.precision, m.recall);
    return m;
}

}  // namespace

MetricsReport binary_report(const ConfusionMatrix& cm, int positive_class) {
    if (cm.num_classes() != 2) throw DataError("binary_report requires exactly 2 classes");
    if (positive_class < 0 || positive_class > 1) throw DataError("binary_report: positive class must be 0 or 1");
    MetricsReport r;
    r.per_class = {one_vs_rest(cm, 0), one_vs_rest(cm, 1)};
    const ClassMetrics& pos = r.per_class[static_cast<size_t>(positive_class)];
    r.precision = pos.precision;
    r.recall = pos.recall;
    r.f_score = pos.f1;
    bool acc_degenerate = false;
    r.accuracy = safe_div(cm.trace(), cm.total(), acc_degenerate);
    r.macro_f1_mean = (r.per_class[0].f1 + r.per_class[1].f1) / 2.0;
    const double mp = (r.per_class[0].precision + r.per_class[1].precision) / 2.0;
    const double mr = (r.per_class[0].recall + r.per_class[1].recall) / 2.0;
    r.macro_f1_of_means = f1_of(mp, mr);
    r.degenerate = acc_degenerate || r.per_class[0].degenerate || r.per_class[1].degenerate;
    return r;
}

MetricsReport macro_report(const ConfusionMatrix& cm) {
    MetricsReport r;
    const int c = cm.num_classes();
    double psum = 0.0, rsum = 0.0, fsum = 0.0;
    for (int k = 0; k < c; ++k) {
        ClassMetrics m = one_vs_rest(cm, k);
        psum += m.precision;
        rsum += m.recall;
        fsum += m.f1;
        r.degenerate = r.degenerate || m.degenerate;
        r.per_class.push_back(m);
    }
    r.precision = psum / c;
    r.recall = rsum / c;
    r.macro_f1_mean = fsum / c;
    r.macro_f1_of_means = f1_of(r.precision, r.recall);
    r.f_score = r.macro_f1_mean;
    bool acc_degenerate = false;
    r.accuracy = safe_div(cm.trace(), cm.total(), acc_degenerate);
    r.degenerate = r.degenerate || acc_degenerate;
    return r;
}

}  // namespace ftlab
