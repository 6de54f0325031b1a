#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "../error.hpp"

namespace iotgem::ml {

/// Non-owning row-major matrix.
struct MatrixView {
    const double* data = nullptr;
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::span<const double> row(std::size_t r) const { return {data + r * cols, cols}; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

/// Uniform binary-classifier interface. Implementations must be
/// deterministic given their construction parameters; predict and score are
/// const and thread-safe after fit.
class Classifier {
public:
    virtual ~Classifier() = default;

    virtual std::string_view kind_name() const = 0;
    virtual void fit(MatrixView x, std::span<const int> y) = 0;

    /// Confidence that the row is positive, in [0, 1].
    virtual double score(std::span<const double> row) const = 0;

    virtual int predict(std::span<const double> row) const { return score(row) > 0.5 ? 1 : 0; }

    /// Whether fit accepts a single-class training set (and then predicts it).
    virtual bool tolerates_single_class() const { return false; }

    virtual nlohmann::json parameters() const = 0;
    virtual void load_parameters(const nlohmann::json& params) = 0;
};

namespace detail {

/// Per-column mean and standard deviation (0 replaced by 1) from training rows.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;

    void fit(MatrixView x) {
        mean.assign(x.cols, 0.0);
        scale.assign(x.cols, 0.0);
        for (std::size_t r = 0; r < x.rows; ++r)
            for (std::size_t c = 0; c < x.cols; ++c) mean[c] += x.at(r, c);
        for (auto& m : mean) m /= static_cast<double>(x.rows);
        for (std::size_t r = 0; r < x.rows; ++r)
            for (std::size_t c = 0; c < x.cols; ++c) {
                const double d = x.at(r, c) - mean[c];
                scale[c] += d * d;
            }
        for (auto& s : scale) {
            s = std::sqrt(s / static_cast<double>(x.rows));
            if (!(s > 1e-12)) s = 1.0;
        }
    }

    double apply(std::size_t c, double v) const { return (v - mean[c]) / scale[c]; }

    nlohmann::json to_json() const { return {{"mean", mean}, {"scale", scale}}; }
    void from_json(const nlohmann::json& j) {
        mean = j.at("mean").get<std::vector<double>>();
        scale = j.at("scale").get<std::vector<double>>();
    }
};

}  // namespace detail

}  // namespace iotgem::ml
