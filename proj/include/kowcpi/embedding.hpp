#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace kowcpi {

// Fixed-capacity buffer of the most recent non-conformity scores, newest
// last. Pushing into a full buffer evicts the oldest entry.
class ResidualHistory {
public:
    explicit ResidualHistory(std::size_t capacity) : capacity_(capacity) {
        if (capacity_ == 0) throw std::invalid_argument("residual history capacity must be >= 1");
        values_.reserve(capacity_);
    }

    void push(double value) {
        if (values_.size() == capacity_) values_.erase(values_.begin());
        values_.push_back(value);
    }

    bool full() const { return values_.size() == capacity_; }
    std::size_t size() const { return values_.size(); }
    std::size_t capacity() const { return capacity_; }
    const std::vector<double>& values() const { return values_; }

private:
    std::size_t capacity_;
    std::vector<double> values_;
};

// Overlapping sliding-window view of a full residual history: n = T - w
// predictor rows of length w plus one query row. Within a row the first
// coordinate is the most recent residual of that window; the first
// coordinate is the one entering the weight-balance constraint.
struct SegmentSet {
    std::size_t window = 0;
    std::vector<double> predictors; // row-major, n x window
    std::vector<double> responses;  // n values, responses[i] follows row i in time
    std::vector<double> query;      // the window most recent residuals

    std::size_t size() const { return responses.size(); }

    std::span<const double> predictor(std::size_t i) const {
        return {predictors.data() + i * window, window};
    }
};

// Breaks a full history of T residuals into n = T - w overlapping
// (predictor, response) segments plus the query segment. Requires n >= 2,
// i.e. 1 <= w <= T - 2; fewer than two atoms makes quantile estimation
// vacuous.
inline SegmentSet build_segments(const ResidualHistory& history, std::size_t window) {
    if (!history.full()) {
        throw std::invalid_argument("residual history not full: have " +
                                    std::to_string(history.size()) + " of " +
                                    std::to_string(history.capacity()));
    }
    const std::size_t total = history.capacity();
    if (window < 1 || window + 2 > total) {
        throw std::invalid_argument("window length " + std::to_string(window) +
                                    " outside admissible range [1, " + std::to_string(total - 2) +
                                    "] for history of " + std::to_string(total));
    }

    const auto& values = history.values();
    const std::size_t n = total - window;

    SegmentSet out;
    out.window = window;
    out.predictors.resize(n * window);
    out.responses.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < window; ++j) {
            out.predictors[i * window + j] = values[i + window - 1 - j];
        }
        out.responses[i] = values[i + window];
    }
    out.query.resize(window);
    for (std::size_t j = 0; j < window; ++j) {
        out.query[j] = values[total - 1 - j];
    }
    return out;
}

} // namespace kowcpi
