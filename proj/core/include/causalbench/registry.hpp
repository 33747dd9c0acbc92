#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "causalbench/bottleneck.hpp"
#include "causalbench/types.hpp"

namespace causalbench::harness {

struct MethodContext {
    int max_lag = 1;
    std::uint64_t seed = 0;
    // f4/f5 protocol: fit scores on the whole series (tuned methods still
    // tune on the 80/20 split); otherwise scores come from the 80% fit and
    // mse from the held-out 20%.
    bool score_on_full = false;
};

struct MethodResult {
    ScoreMatrix scores;
    double mse = std::numeric_limits<double>::quiet_NaN();
    std::string flags;
};

using MethodFn = std::function<MethodResult(const Series&, const MethodContext&)>;

struct BottleneckDefaults {
    int d = 0;  // 0 = use K
    double lambda_sparse = 1e-3;
    bottleneck::TrainConfig train;
};

// Name -> scorer registry. Every stage draws its methods from here, so
// external scorers (including precomputed score CSVs) slot into any plan.
class MethodRegistry {
  public:
    void add(const std::string& name, MethodFn fn);
    // Validates the CSV now; the method then ignores its input series.
    void add_file_backed(const std::string& name, const std::filesystem::path& scores_csv);

    bool has(const std::string& name) const;
    const MethodFn& get(const std::string& name) const;
    std::vector<std::string> names() const;

    // bottleneck, ols, ridge, lasso, rrr, granger, pcmci_lite
    static MethodRegistry builtins(const BottleneckDefaults& defaults = {});

  private:
    std::map<std::string, MethodFn> methods_;
};

}  // namespace causalbench::harness
