// Dataset ingestion: interval-annotated triple files (YAGO11k/Wikidata12k
// style), year binning, discretization into a SnapshotSequence, a seeded
// synthetic generator and the versioned binary snapshot cache.
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tie/core.hpp"

namespace tie {

/// One raw input line: names plus an optional [begin, end] year interval.
/// Missing date fields (written as "####-##-##" or absent) stay nullopt
/// until substitute_missing_years resolves them to the dataset extremes.
struct IntervalFact {
    std::string s_name, r_name, o_name;
    std::optional<int> begin_year;
    std::optional<int> end_year;
    Split split = Split::Train;
    bool has_split = false;  // true when read from an official split file
};

/// Contiguous, non-overlapping year ranges mapping calendar years to steps
/// 1..T in order. bin i (0-based) covers [bounds[i].first, bounds[i].second].
struct TimeBinning {
    std::vector<std::pair<int, int>> bounds;

    TimeStep num_steps() const { return TimeStep(bounds.size()); }
    /// Step containing `year`, or 0 if outside every bin.
    TimeStep step_of(int year) const;
    void validate() const;  // throws on gaps, overlaps or empty table
};

/// Parses tab-separated `s \t r \t o \t begin \t end` lines. Dates accept
/// YYYY, YYYY-MM-DD and the released datasets' wildcard forms; a field of
/// all '#' marks (or a missing trailing field) yields nullopt. Malformed
/// lines raise ParseError with the line number.
std::vector<IntervalFact> parse_interval_file(const std::filesystem::path& path);

/// Resolves missing begin/end years to the dataset-wide first/last year.
void substitute_missing_years(std::vector<IntervalFact>& facts);

/// Builds a binning from a text file of "year_start year_end" lines.
TimeBinning load_bin_file(const std::filesystem::path& path);

/// Greedy auto-binning: one bin per calendar year carrying at least
/// min_facts interval-start counts, merging sparse years into their
/// successor (the released datasets were produced the same way).
TimeBinning auto_binning(const std::vector<IntervalFact>& facts, int min_facts);

struct DiscretizeOptions {
    double train_frac = 0.86;
    double valid_frac = 0.07;  // remainder is test
    std::uint64_t split_seed = 0;  // used only for facts without a split tag
    bool drop_out_of_range = true; // facts entirely outside the binning
};

/// Expands each interval fact into one quadruple per overlapped step,
/// interns names, deduplicates quadruples and assigns splits (kept from the
/// input when tagged, sampled i.i.d. otherwise).
SnapshotSequence discretize(std::vector<IntervalFact> facts,
                            const TimeBinning& binning,
                            const DiscretizeOptions& opt);

struct SyntheticConfig {
    std::uint32_t n_entities = 50;
    std::uint32_t n_relations = 4;
    TimeStep num_steps = 12;
    std::uint32_t initial_facts = 200;
    double birth_rate = 0.10;  // new facts per step (t >= 2) as a fraction of initial_facts
    double death_rate = 0.05;  // per-step probability an alive fact is dropped
    double train_frac = 0.90;
    double valid_frac = 0.05;
    std::uint64_t seed = 0;
};

/// Deterministic synthetic TKG. Facts are born as distinct uniform triples
/// (s != o) and persist with geometric lifetimes: each fact alive at t-1
/// survives to t with probability 1 - death_rate (one uniform draw per
/// alive fact in insertion order), then round(birth_rate * initial_facts)
/// new facts are born. Splits are sampled i.i.d. per quadruple.
SnapshotSequence generate_synthetic(const SyntheticConfig& cfg);

/// Versioned binary snapshot cache (vocab tables + per-step fact lists).
/// Writes are atomic (temp file + rename); round-trips bit-exactly.
void save_cache(const SnapshotSequence& seq, const std::filesystem::path& path);
SnapshotSequence load_cache(const std::filesystem::path& path);

/// Directory-level ingestion: if <dir>/train.txt exists, train/valid/test
/// files are parsed with their split tags preserved; otherwise every *.txt
/// file in the directory (or `dir` itself when it is a file) is parsed and
/// splits are sampled per DiscretizeOptions.
std::vector<IntervalFact> parse_dataset_dir(const std::filesystem::path& dir);

}  // namespace tie
