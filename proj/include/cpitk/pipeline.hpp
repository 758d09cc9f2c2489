#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cpitk/backtest.hpp"
#include "cpitk/diffusion.hpp"
#include "cpitk/outlierscan.hpp"
#include "cpitk/seasadj.hpp"
#include "cpitk/selection.hpp"

namespace cpitk::pipeline {

inline constexpr std::string_view kVersion = "1.0.0";

struct Intervention {
    outlierscan::OutlierType type = outlierscan::OutlierType::AO;
    YearMonth month;
};

/// Resolved pipeline settings. Relative data paths are resolved against
/// `base_dir` (the config file's directory).
struct PipelineConfig {
    std::filesystem::path base_dir;
    std::string target_path;
    std::string adjusted_path;
    std::string covariates_path;
    std::string lunar_override_path;
    std::optional<MonthRange> sample;

    // Model used by fit / outliers / sf-effects / seasadj / backtest.
    selection::OrderSpec orders{1, 0, 1, 2};
    calendar::HolidayWindow tau{4, 0, 12};
    std::vector<Intervention> interventions;

    // Grid search.
    int grid_max_order = 2;
    std::vector<selection::OrderSpec> grid_orders;       // empty: full grid up to grid_max_order
    std::vector<calendar::HolidayWindow> grid_taus;      // empty: the 147-window grid
    selection::SummaryOptions summary;

    // Outliers.
    outlierscan::DetectOptions detect;
    bool census = true;

    // Backtests.
    backtest::BacktestProtocol protocol;
    std::vector<std::string> engines{"sarimax", "di"};

    // Seasonal adjustment and DI.
    seasadj::Mode mode = seasadj::Mode::Additive;
    diffusion::DiGrid di_grid;
    int default_transform = 1;
    std::vector<int> transform_list;              // per covariate column, if given
    std::map<std::string, int> transform_by_name; // overrides by column name
    bool use_official_adjusted = true;

    std::uint64_t seed = 20020101;
    int threads = 1;
    std::string output_dir = "out";
    bool fast = false;  // refit stride 6 for the grid's forecast criterion and backtests
};

/// Parses a JSON config; unknown keys and bad values throw DataError.
/// Referenced data files must exist.
[[nodiscard]] PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);
[[nodiscard]] PipelineConfig load_config(const std::filesystem::path& path);

/// Resolved settings as canonical JSON; threads and output_dir are left out
/// because they do not change results.
[[nodiscard]] std::string canonical_json(const PipelineConfig& config);

/// 64-bit FNV-1a.
[[nodiscard]] std::uint64_t fnv1a64(std::string_view bytes);
/// Hex FNV-1a of canonical_json.
[[nodiscard]] std::string config_hash(const PipelineConfig& config);

[[nodiscard]] const std::vector<std::string>& subcommands();

/// Runs one subcommand and writes its artifacts under config.output_dir.
/// Progress goes to `log`. Throws DataError or NumericalError.
void run_subcommand(const std::string& name, const PipelineConfig& config, std::ostream& log);

/// Spec of the configured model over `range`: orders, SF columns for tau and
/// the interventions.
[[nodiscard]] sarimax::SarimaSpec model_spec(const PipelineConfig& config, MonthRange range,
                                             const calendar::LunarTable& table);

}  // namespace cpitk::pipeline
