#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ftlab/error.hpp"

namespace ftlab {

// Rows are true classes, columns are predictions.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(int num_classes);
    int num_classes() const { return c_; }
    int64_t& at(int truth, int pred) { return counts_[static_cast<size_t>(truth) * c_ + pred]; }
    int64_t at(int truth, int pred) const { return counts_[static_cast<size_t>(truth) * c_ + pred]; }
    int64_t total() const;
    int64_t row_sum(int truth) const;
    int64_t col_sum(int pred) const;
    int64_t trace() const;

private:
    int c_;
    std::vector<int64_t> counts_;
};

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted, int num_classes);

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool degenerate = false;  // a zero denominator was mapped to 0
};

struct MetricsReport {
    // headline values: the positive class for binary reports, macro averages
    // for multi-class reports
    double precision = 0.0;
    double recall = 0.0;
    double accuracy = 0.0;
    double f_score = 0.0;

    std::vector<ClassMetrics> per_class;
    double macro_f1_mean = 0.0;      // mean of per-class F1 (the reported convention)
    double macro_f1_of_means = 0.0;  // F1 of macro precision and macro recall (computed only)
    bool degenerate = false;
};

// Positive-class precision/recall/F1 plus overall accuracy; C must be 2.
MetricsReport binary_report(const ConfusionMatrix& cm, int positive_class);

// One-vs-rest per-class metrics, macro averages, accuracy = trace/total.
// Classes absent from both truth and prediction score 0 (flagged) and are
// still averaged.
MetricsReport macro_report(const ConfusionMatrix& cm);

}  // namespace ftlab
