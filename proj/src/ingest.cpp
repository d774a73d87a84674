#include "nsotree/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "nsotree/math.hpp"

namespace nsotree {

std::string to_string(ColumnRole r) {
    switch (r) {
        case ColumnRole::Numeric: return "numeric";
        case ColumnRole::Categorical: return "categorical";
        case ColumnRole::Duration: return "duration";
        case ColumnRole::Event: return "event";
        case ColumnRole::Ignore: return "ignore";
    }
    throw std::logic_error("unreachable");
}

ColumnRole column_role_from_string(const std::string& s) {
    if (s == "numeric") return ColumnRole::Numeric;
    if (s == "categorical") return ColumnRole::Categorical;
    if (s == "duration") return ColumnRole::Duration;
    if (s == "event") return ColumnRole::Event;
    if (s == "ignore") return ColumnRole::Ignore;
    throw std::invalid_argument("unknown column role: " + s);
}

void Schema::validate() const {
    int durations = 0, events = 0;
    for (const auto& c : columns) {
        if (c.name.empty()) throw std::invalid_argument("Schema: empty column name");
        if (c.role == ColumnRole::Duration) ++durations;
        if (c.role == ColumnRole::Event) ++events;
    }
    if (durations != 1 || events != 1)
        throw std::invalid_argument("Schema: exactly one duration and one event column required");
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_commas(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    // strip a trailing \r from files with CRLF endings
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r')
        out.back().pop_back();
    return out;
}

bool is_missing(const std::string& cell) { return cell.empty() || cell == "NA"; }

double parse_number(const std::string& cell, std::size_t line_no, const std::string& column) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(cell, &pos);
    } catch (const std::exception&) {
        throw std::runtime_error("line " + std::to_string(line_no) + ": column '" + column +
                                 "' has non-numeric value '" + cell + "'");
    }
    if (pos != cell.size())
        throw std::runtime_error("line " + std::to_string(line_no) + ": column '" + column +
                                 "' has non-numeric value '" + cell + "'");
    return v;
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

Schema parse_schema_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open schema file: " + path);
    Schema schema;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + " line " + std::to_string(line_no) +
                                     ": expected 'column = role'");
        ColumnSpec spec;
        spec.name = trim(line.substr(0, eq));
        spec.role = column_role_from_string(trim(line.substr(eq + 1)));
        schema.columns.push_back(std::move(spec));
    }
    schema.validate();
    return schema;
}

Schema default_schema(const std::vector<std::string>& header) {
    Schema schema;
    for (const auto& name : header) {
        ColumnSpec spec;
        spec.name = name;
        if (name == "time") spec.role = ColumnRole::Duration;
        else if (name == "event") spec.role = ColumnRole::Event;
        else spec.role = ColumnRole::Numeric;
        schema.columns.push_back(std::move(spec));
    }
    schema.validate();
    return schema;
}

LoadResult load_csv(const std::string& path, const Schema& schema,
                    const std::vector<CategoryEncoding>& fixed) {
    schema.validate();
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open csv file: " + path);

    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error(path + ": empty file");
    const auto header = split_commas(line);

    // Map each schema column to its position in the header.
    std::unordered_map<std::string, std::size_t> header_pos;
    for (std::size_t i = 0; i < header.size(); ++i) header_pos[header[i]] = i;
    std::unordered_map<std::string, bool> schema_names;
    for (const auto& c : schema.columns) schema_names[c.name] = true;
    for (const auto& h : header)
        if (!schema_names.count(h))
            throw std::runtime_error(path + ": unknown column '" + h + "' not in schema");

    struct Bound {
        const ColumnSpec* spec;
        std::size_t pos;
    };
    std::vector<Bound> bound;
    std::size_t duration_pos = 0, event_pos = 0;
    for (const auto& c : schema.columns) {
        const auto it = header_pos.find(c.name);
        if (it == header_pos.end())
            throw std::runtime_error(path + ": schema column '" + c.name + "' missing from header");
        if (c.role == ColumnRole::Duration) duration_pos = it->second;
        else if (c.role == ColumnRole::Event) event_pos = it->second;
        else if (c.role != ColumnRole::Ignore) bound.push_back({&c, it->second});
    }

    std::unordered_map<std::string, const CategoryEncoding*> fixed_by_col;
    for (const auto& e : fixed) fixed_by_col[e.column] = &e;

    // Numeric cells are parsed up front (so errors name the source line);
    // categorical cells stay as strings until all levels are known.
    struct RawRow {
        std::vector<double> numeric;       // aligned with `bound`; unset for categoricals
        std::vector<std::string> category; // aligned with `bound`; empty for numerics
        double time;
        std::uint8_t event;
    };
    std::vector<RawRow> rows;
    LoadResult result;
    std::size_t line_no = 1;
    while (std::getline(f, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto cells = split_commas(line);
        if (cells.size() != header.size())
            throw std::runtime_error("line " + std::to_string(line_no) + ": expected " +
                                     std::to_string(header.size()) + " fields, got " +
                                     std::to_string(cells.size()));
        bool missing = is_missing(cells[duration_pos]) || is_missing(cells[event_pos]);
        for (const auto& b : bound) missing = missing || is_missing(cells[b.pos]);
        if (missing) {
            ++result.rows_dropped;
            continue;
        }
        RawRow row;
        row.time = parse_number(cells[duration_pos], line_no, header[duration_pos]);
        if (row.time < 0.0)
            throw std::runtime_error("line " + std::to_string(line_no) + ": negative time");
        const std::string& ev = cells[event_pos];
        if (ev == "0") row.event = 0;
        else if (ev == "1") row.event = 1;
        else
            throw std::runtime_error("line " + std::to_string(line_no) +
                                     ": event value must be 0 or 1, got '" + ev + "'");
        row.numeric.assign(bound.size(), 0.0);
        row.category.resize(bound.size());
        for (std::size_t bi = 0; bi < bound.size(); ++bi) {
            if (bound[bi].spec->role == ColumnRole::Categorical)
                row.category[bi] = cells[bound[bi].pos];
            else
                row.numeric[bi] = parse_number(cells[bound[bi].pos], line_no, bound[bi].spec->name);
        }
        rows.push_back(std::move(row));
    }

    // Level discovery (first appearance) or reuse of a fixed encoding.
    std::vector<CategoryEncoding> encodings;
    std::vector<std::unordered_map<std::string, int>> level_index(bound.size());
    for (std::size_t bi = 0; bi < bound.size(); ++bi) {
        if (bound[bi].spec->role != ColumnRole::Categorical) continue;
        CategoryEncoding enc;
        enc.column = bound[bi].spec->name;
        const auto it = fixed_by_col.find(enc.column);
        if (it != fixed_by_col.end()) {
            enc.levels = it->second->levels;
        } else {
            for (const auto& row : rows) {
                const auto& cell = row.category[bi];
                if (!level_index[bi].count(cell)) {
                    level_index[bi][cell] = static_cast<int>(enc.levels.size());
                    enc.levels.push_back(cell);
                }
            }
        }
        level_index[bi].clear();
        for (std::size_t li = 0; li < enc.levels.size(); ++li)
            level_index[bi][enc.levels[li]] = static_cast<int>(li);
        encodings.push_back(std::move(enc));
    }

    // Feature layout: bound columns in schema order, categoricals expanded.
    std::vector<std::string> names;
    std::vector<int> col_offset(bound.size());
    int d = 0;
    std::size_t enc_i = 0;
    for (std::size_t bi = 0; bi < bound.size(); ++bi) {
        col_offset[bi] = d;
        if (bound[bi].spec->role == ColumnRole::Categorical) {
            for (const auto& level : encodings[enc_i].levels)
                names.push_back(bound[bi].spec->name + "=" + level);
            d += static_cast<int>(encodings[enc_i].levels.size());
            ++enc_i;
        } else {
            names.push_back(bound[bi].spec->name);
            ++d;
        }
    }
    if (d == 0) throw std::runtime_error(path + ": no covariate columns in schema");

    SurvivalDataset ds;
    ds.d = d;
    ds.feature_names = names;
    ds.x.assign(rows.size() * static_cast<std::size_t>(d), 0.0);
    ds.time.reserve(rows.size());
    ds.event.reserve(rows.size());
    for (std::size_t ri = 0; ri < rows.size(); ++ri) {
        double* out = ds.x.data() + ri * static_cast<std::size_t>(d);
        for (std::size_t bi = 0; bi < bound.size(); ++bi) {
            if (bound[bi].spec->role == ColumnRole::Categorical) {
                const auto& cell = rows[ri].category[bi];
                const auto it = level_index[bi].find(cell);
                if (it == level_index[bi].end())
                    throw std::runtime_error("column '" + bound[bi].spec->name +
                                             "': level '" + cell + "' not in fixed encoding");
                out[col_offset[bi] + it->second] = 1.0;
            } else {
                out[col_offset[bi]] = rows[ri].numeric[bi];
            }
        }
        ds.time.push_back(rows[ri].time);
        ds.event.push_back(rows[ri].event);
    }
    ds.validate();
    result.data = std::move(ds);
    result.encodings = std::move(encodings);
    return result;
}

void save_csv(const SurvivalDataset& ds, const std::string& path) {
    ds.validate();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    for (int j = 0; j < ds.d; ++j) {
        const std::string name = ds.feature_names.empty() ? "x" + std::to_string(j)
                                                          : ds.feature_names[static_cast<std::size_t>(j)];
        f << name << ',';
    }
    f << "time,event\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const double* r = ds.row(i);
        for (int j = 0; j < ds.d; ++j) f << fmt17(r[j]) << ',';
        f << fmt17(ds.time[i]) << ',' << (ds.event[i] ? '1' : '0') << '\n';
    }
    if (!f) throw std::runtime_error("write failed: " + path);
}

Standardization standardize(SurvivalDataset& train, const std::vector<SurvivalDataset*>& others) {
    train.validate();
    if (train.size() == 0) throw std::invalid_argument("standardize: empty training set");
    if (train.standardization)
        throw std::invalid_argument("standardize: dataset is already standardized");
    for (auto* o : others) {
        if (o->d != train.d) throw std::invalid_argument("standardize: dimension mismatch");
        if (o->standardization)
            throw std::invalid_argument("standardize: dataset is already standardized");
    }

    const int d = train.d;
    const std::size_t n = train.size();
    std::vector<double> mean(static_cast<std::size_t>(d), 0.0);
    std::vector<double> sd(static_cast<std::size_t>(d), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* r = train.row(i);
        for (int j = 0; j < d; ++j) mean[static_cast<std::size_t>(j)] += r[j];
    }
    for (auto& m : mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* r = train.row(i);
        for (int j = 0; j < d; ++j) {
            const double dv = r[j] - mean[static_cast<std::size_t>(j)];
            sd[static_cast<std::size_t>(j)] += dv * dv;
        }
    }
    for (auto& s : sd) s = std::sqrt(s / static_cast<double>(n));

    std::vector<int> keep;
    for (int j = 0; j < d; ++j) {
        if (sd[static_cast<std::size_t>(j)] > 1e-12) {
            keep.push_back(j);
        } else {
            std::cerr << "standardize: dropping constant column "
                      << (train.feature_names.empty() ? std::to_string(j)
                                                      : train.feature_names[static_cast<std::size_t>(j)])
                      << "\n";
        }
    }
    if (keep.empty()) throw std::invalid_argument("standardize: all columns are constant");

    Standardization stats;
    for (int j : keep) {
        stats.mean.push_back(mean[static_cast<std::size_t>(j)]);
        stats.stddev.push_back(sd[static_cast<std::size_t>(j)]);
    }

    auto transform = [&](SurvivalDataset& ds) {
        SurvivalDataset out;
        out.d = static_cast<int>(keep.size());
        out.time = ds.time;
        out.event = ds.event;
        if (!ds.feature_names.empty())
            for (int j : keep) out.feature_names.push_back(ds.feature_names[static_cast<std::size_t>(j)]);
        out.x.resize(ds.size() * keep.size());
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const double* src = ds.row(i);
            double* dst = out.x.data() + i * keep.size();
            for (std::size_t k = 0; k < keep.size(); ++k)
                dst[k] = (src[keep[k]] - stats.mean[k]) / stats.stddev[k];
        }
        out.standardization = stats;
        ds = std::move(out);
    };
    transform(train);
    for (auto* o : others) transform(*o);
    return stats;
}

void apply_standardization(SurvivalDataset& ds, const Standardization& stats) {
    ds.validate();
    if (ds.standardization)
        throw std::invalid_argument("apply_standardization: dataset is already standardized");
    if (stats.mean.size() != static_cast<std::size_t>(ds.d) ||
        stats.stddev.size() != static_cast<std::size_t>(ds.d))
        throw std::invalid_argument("apply_standardization: statistics dimension mismatch");
    for (std::size_t i = 0; i < ds.size(); ++i) {
        double* r = ds.row(i);
        for (int j = 0; j < ds.d; ++j)
            r[j] = (r[j] - stats.mean[static_cast<std::size_t>(j)]) /
                   stats.stddev[static_cast<std::size_t>(j)];
    }
    ds.standardization = stats;
}

SurvivalDataset select_features(const SurvivalDataset& ds, const std::vector<std::string>& names) {
    if (ds.feature_names.empty())
        throw std::invalid_argument("select_features: dataset has no feature names");
    std::unordered_map<std::string, int> pos;
    for (int j = 0; j < ds.d; ++j) pos[ds.feature_names[static_cast<std::size_t>(j)]] = j;
    std::vector<int> cols;
    for (const auto& n : names) {
        const auto it = pos.find(n);
        if (it == pos.end())
            throw std::invalid_argument("select_features: column '" + n + "' not found");
        cols.push_back(it->second);
    }
    SurvivalDataset out;
    out.d = static_cast<int>(cols.size());
    out.feature_names = names;
    out.time = ds.time;
    out.event = ds.event;
    out.x.resize(ds.size() * cols.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const double* src = ds.row(i);
        double* dst = out.x.data() + i * cols.size();
        for (std::size_t k = 0; k < cols.size(); ++k) dst[k] = src[cols[k]];
    }
    return out;
}

std::vector<SurvivalDataset> split_dataset(const SurvivalDataset& ds,
                                           const std::vector<double>& fractions,
                                           std::uint64_t seed) {
    ds.validate();
    if (fractions.empty()) throw std::invalid_argument("split_dataset: no fractions");
    double sum = 0.0;
    for (double fr : fractions) {
        if (!(fr > 0.0)) throw std::invalid_argument("split_dataset: fractions must be positive");
        sum += fr;
    }
    if (std::fabs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("split_dataset: fractions must sum to 1");

    std::vector<int> order(ds.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(derive_seed(seed, 0x5b17));
    shuffle_deterministic(order, rng);

    std::vector<SurvivalDataset> parts;
    double cum = 0.0;
    std::size_t start = 0;
    for (std::size_t k = 0; k < fractions.size(); ++k) {
        cum += fractions[k];
        const std::size_t stop = k + 1 == fractions.size()
                                     ? ds.size()
                                     : static_cast<std::size_t>(std::llround(cum * static_cast<double>(ds.size())));
        std::vector<int> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(stop));
        parts.push_back(ds.subset(idx));
        if (parts.back().num_events() == 0)
            throw std::invalid_argument("split_dataset: part " + std::to_string(k) +
                                        " has no events");
        start = stop;
    }
    return parts;
}

}  // namespace nsotree
