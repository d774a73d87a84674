#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nsotree/survival.hpp"

namespace nsotree {

enum class ColumnRole { Numeric, Categorical, Duration, Event, Ignore };

std::string to_string(ColumnRole r);
ColumnRole column_role_from_string(const std::string& s);

struct ColumnSpec {
    std::string name;
    ColumnRole role = ColumnRole::Numeric;
};

/// Column roles for a CSV file. Exactly one duration and one event column.
struct Schema {
    std::vector<ColumnSpec> columns;
    void validate() const;
};

/// Reads a schema from a key = value file, one `column = role` line per
/// column. '#' starts a comment.
Schema parse_schema_file(const std::string& path);

/// Fallback schema derived from a header: "time" -> duration, "event" ->
/// event, everything else numeric.
Schema default_schema(const std::vector<std::string>& header);

/// First-appearance level order for one categorical column; fixes the
/// one-hot layout so training and evaluation files agree.
struct CategoryEncoding {
    std::string column;
    std::vector<std::string> levels;
};

struct LoadResult {
    SurvivalDataset data;
    std::vector<CategoryEncoding> encodings;
    int rows_dropped = 0;  // rows removed for missing values
};

/// Loads a comma-separated file with a header row. Categorical columns are
/// one-hot expanded (feature name "col=level"); rows with a missing cell
/// ("" or "NA") are dropped and counted. Malformed rows raise with the
/// 1-based line number. When `fixed` encodings are given, levels must come
/// from them (unseen level is an error).
LoadResult load_csv(const std::string& path, const Schema& schema,
                    const std::vector<CategoryEncoding>& fixed = {});

/// Writes the dataset back out with columns <features...>,time,event and
/// 17-significant-digit decimals, so load(save(ds)) reproduces every value.
void save_csv(const SurvivalDataset& ds, const std::string& path);

/// Standardizes `train` in place to zero mean / unit variance per column
/// (statistics from train only) and applies the same transform to `others`.
/// Constant columns are dropped from every dataset with a warning. Errors
/// if train already carries standardization metadata.
Standardization standardize(SurvivalDataset& train, const std::vector<SurvivalDataset*>& others);

/// Applies previously fitted statistics to a raw dataset.
void apply_standardization(SurvivalDataset& ds, const Standardization& stats);

/// Reorders/subsets columns by feature name (used to align an evaluation
/// file with a checkpoint's feature list).
SurvivalDataset select_features(const SurvivalDataset& ds, const std::vector<std::string>& names);

/// Deterministic shuffled partition; every part must contain an event.
std::vector<SurvivalDataset> split_dataset(const SurvivalDataset& ds,
                                           const std::vector<double>& fractions,
                                           std::uint64_t seed);

}  // namespace nsotree
