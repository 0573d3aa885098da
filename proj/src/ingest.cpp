#include "tie/ingest.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "tie/binio.hpp"

namespace tie {
namespace {

namespace fs = std::filesystem;

// Parses the year component of a date token. Accepted forms: "1999",
// "1999-07-01", "1999-##-##", "-431-##-##" (BC years keep their sign),
// "####-##-##" and "" both mean missing.
std::optional<int> parse_year(std::string_view tok, const fs::path& path,
                              std::size_t line_no) {
    if (tok.empty() || tok[0] == '#') return std::nullopt;
    bool neg = tok[0] == '-';
    std::size_t i = neg ? 1 : 0;
    if (i < tok.size() && tok[i] == '#') return std::nullopt;
    long year = 0;
    std::size_t digits = 0;
    for (; i < tok.size() && tok[i] >= '0' && tok[i] <= '9'; ++i, ++digits)
        year = year * 10 + (tok[i] - '0');
    if (digits == 0)
        throw ParseError(path.string() + ":" + std::to_string(line_no) +
                         ": bad date field '" + std::string(tok) + "'");
    // Anything after the year must be a -MM-DD style suffix; we keep year
    // precision only, so it is validated loosely and discarded.
    if (i < tok.size() && tok[i] != '-')
        throw ParseError(path.string() + ":" + std::to_string(line_no) +
                         ": bad date field '" + std::string(tok) + "'");
    return int(neg ? -year : year);
}

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find('\t', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

struct Interner {
    std::unordered_map<std::string, std::uint32_t> ids;
    std::vector<std::string> names;
    std::uint32_t intern(const std::string& name) {
        auto [it, inserted] = ids.emplace(name, std::uint32_t(names.size()));
        if (inserted) names.push_back(name);
        return it->second;
    }
};

using binio::read_str;
using binio::read_u32;
using binio::read_u64;
using binio::write_str;
using binio::write_u32;
using binio::write_u64;

constexpr std::uint32_t kCacheMagic = 0x54494543;  // "TIEC"
constexpr std::uint32_t kCacheVersion = 1;

}  // namespace

TimeStep TimeBinning::step_of(int year) const {
    for (std::size_t i = 0; i < bounds.size(); ++i)
        if (year >= bounds[i].first && year <= bounds[i].second)
            return TimeStep(i + 1);
    return 0;
}

void TimeBinning::validate() const {
    if (bounds.empty()) throw ParseError("binning table is empty");
    for (std::size_t i = 0; i < bounds.size(); ++i) {
        if (bounds[i].first > bounds[i].second)
            throw ParseError("bin " + std::to_string(i + 1) + " is inverted");
        if (i > 0 && bounds[i].first != bounds[i - 1].second + 1)
            throw ParseError("bins must be contiguous; gap or overlap before bin " +
                             std::to_string(i + 1));
    }
}

std::vector<IntervalFact> parse_interval_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<IntervalFact> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_tabs(line);
        if (fields.size() < 3)
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": expected at least 3 tab-separated fields, got " +
                             std::to_string(fields.size()));
        IntervalFact f;
        f.s_name = std::string(fields[0]);
        f.r_name = std::string(fields[1]);
        f.o_name = std::string(fields[2]);
        if (f.s_name.empty() || f.r_name.empty() || f.o_name.empty())
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": empty entity or relation name");
        if (fields.size() > 3) f.begin_year = parse_year(fields[3], path, line_no);
        if (fields.size() > 4) f.end_year = parse_year(fields[4], path, line_no);
        out.push_back(std::move(f));
    }
    return out;
}

void substitute_missing_years(std::vector<IntervalFact>& facts) {
    std::optional<int> lo, hi;
    for (const auto& f : facts) {
        for (auto y : {f.begin_year, f.end_year}) {
            if (!y) continue;
            if (!lo || *y < *lo) lo = y;
            if (!hi || *y > *hi) hi = y;
        }
    }
    if (!lo) return;  // nothing dated at all
    for (auto& f : facts) {
        if (!f.begin_year) f.begin_year = lo;
        if (!f.end_year) f.end_year = hi;
        if (*f.begin_year > *f.end_year) std::swap(f.begin_year, f.end_year);
    }
}

TimeBinning load_bin_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    TimeBinning bins;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        int a, b;
        if (!(ss >> a >> b))
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": expected 'year_start year_end'");
        bins.bounds.emplace_back(a, b);
    }
    bins.validate();
    return bins;
}

TimeBinning auto_binning(const std::vector<IntervalFact>& facts, int min_facts) {
    std::map<int, int> starts;  // interval-start counts per year
    for (const auto& f : facts)
        if (f.begin_year) ++starts[*f.begin_year];
    if (starts.empty()) throw ParseError("no dated facts to bin");

    TimeBinning bins;
    int bin_start = starts.begin()->first;
    int count = 0;
    int prev_year = bin_start;
    for (auto [year, n] : starts) {
        count += n;
        prev_year = year;
        if (count >= min_facts) {
            bins.bounds.emplace_back(bin_start, year);
            bin_start = year + 1;
            count = 0;
        }
    }
    if (count > 0 || bins.bounds.empty())
        bins.bounds.emplace_back(bin_start, std::max(prev_year, bin_start));
    // Re-anchor interior boundaries so bins tile the year line contiguously.
    for (std::size_t i = 1; i < bins.bounds.size(); ++i)
        bins.bounds[i].first = bins.bounds[i - 1].second + 1;
    bins.validate();
    return bins;
}

SnapshotSequence discretize(std::vector<IntervalFact> facts,
                            const TimeBinning& binning,
                            const DiscretizeOptions& opt) {
    binning.validate();
    substitute_missing_years(facts);

    SnapshotSequence seq;
    Interner ents, rels;
    const TimeStep T = binning.num_steps();
    seq.snapshots.resize(std::size_t(T));
    for (TimeStep t = 1; t <= T; ++t) seq.snapshots[std::size_t(t) - 1].t = t;

    struct PendingFact {
        Quadruple q;
        Split split;
        bool has_split;
    };
    std::vector<PendingFact> pending;
    std::size_t dropped = 0;
    for (const auto& f : facts) {
        if (!f.begin_year) continue;  // undated after substitution: no dates at all
        TimeStep lo = binning.step_of(*f.begin_year);
        TimeStep hi = binning.step_of(*f.end_year);
        if (lo == 0 && hi == 0) {
            // Entirely outside the binning range.
            if (!opt.drop_out_of_range)
                throw ParseError("fact (" + f.s_name + ", " + f.r_name + ", " +
                                 f.o_name + ") has unbinnable years");
            ++dropped;
            continue;
        }
        if (lo == 0) lo = 1;
        if (hi == 0) hi = T;
        EntityId s = ents.intern(f.s_name);
        RelationId r = rels.intern(f.r_name);
        EntityId o = ents.intern(f.o_name);
        for (TimeStep t = lo; t <= hi; ++t)
            pending.push_back({{s, r, o, t}, f.split, f.has_split});
    }
    if (dropped > 0)
        std::fprintf(stderr, "ingest: dropped %zu facts outside the binning range\n",
                     dropped);

    // Dedup per step, official split tags win over sampled ones.
    Rng split_rng(derive_seed(opt.split_seed, "splits"));
    std::vector<TripleSet> seen(std::size_t(T));
    for (const auto& p : pending) {
        auto& snap = seq.snapshots[std::size_t(p.q.t) - 1];
        if (!seen[std::size_t(p.q.t) - 1].insert(p.q.triple()).second) continue;
        Split sp = p.split;
        if (!p.has_split) {
            double u = next_double(split_rng);
            sp = u < opt.train_frac                   ? Split::Train
                 : u < opt.train_frac + opt.valid_frac ? Split::Valid
                                                       : Split::Test;
        }
        snap.facts.push_back(p.q);
        snap.split.push_back(sp);
    }

    seq.entity_names = std::move(ents.names);
    seq.relation_names = std::move(rels.names);
    seq.split_seed = opt.split_seed;
    seq.finalize();
    return seq;
}

SnapshotSequence generate_synthetic(const SyntheticConfig& cfg) {
    if (cfg.num_steps < 1 || cfg.n_entities < 2 || cfg.n_relations < 1)
        throw std::invalid_argument("degenerate synthetic config");
    Rng rng(derive_seed(cfg.seed, "synthetic"));

    auto draw_triple = [&](const TripleSet& alive) {
        // Rejection-sample a distinct triple with s != o.
        while (true) {
            Triple tr;
            tr.s = EntityId(next_below(rng, cfg.n_entities));
            tr.r = RelationId(next_below(rng, cfg.n_relations));
            tr.o = EntityId(next_below(rng, cfg.n_entities));
            if (tr.s == tr.o) continue;
            if (alive.count(tr)) continue;
            return tr;
        }
    };

    SnapshotSequence seq;
    seq.snapshots.resize(std::size_t(cfg.num_steps));
    std::vector<Triple> alive_list;  // insertion order drives survival draws
    TripleSet alive;
    const std::uint32_t births_per_step =
        std::uint32_t(std::llround(cfg.birth_rate * cfg.initial_facts));

    Rng split_rng(derive_seed(cfg.seed, "synthetic-splits"));
    for (TimeStep t = 1; t <= cfg.num_steps; ++t) {
        if (t == 1) {
            for (std::uint32_t i = 0; i < cfg.initial_facts; ++i) {
                Triple tr = draw_triple(alive);
                alive.insert(tr);
                alive_list.push_back(tr);
            }
        } else {
            std::vector<Triple> survivors;
            survivors.reserve(alive_list.size());
            for (const Triple& tr : alive_list) {
                if (next_double(rng) >= cfg.death_rate) {
                    survivors.push_back(tr);
                } else {
                    alive.erase(tr);
                }
            }
            alive_list = std::move(survivors);
            for (std::uint32_t i = 0; i < births_per_step; ++i) {
                Triple tr = draw_triple(alive);
                alive.insert(tr);
                alive_list.push_back(tr);
            }
        }
        auto& snap = seq.snapshots[std::size_t(t) - 1];
        snap.t = t;
        for (const Triple& tr : alive_list) {
            double u = next_double(split_rng);
            Split sp = u < cfg.train_frac                   ? Split::Train
                       : u < cfg.train_frac + cfg.valid_frac ? Split::Valid
                                                             : Split::Test;
            snap.facts.push_back({tr.s, tr.r, tr.o, t});
            snap.split.push_back(sp);
        }
    }

    seq.entity_names.resize(cfg.n_entities);
    for (std::uint32_t e = 0; e < cfg.n_entities; ++e)
        seq.entity_names[e] = "e" + std::to_string(e);
    seq.relation_names.resize(cfg.n_relations);
    for (std::uint32_t r = 0; r < cfg.n_relations; ++r)
        seq.relation_names[r] = "r" + std::to_string(r);
    seq.split_seed = cfg.seed;
    seq.finalize();
    return seq;
}

void save_cache(const SnapshotSequence& seq, const fs::path& path) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot write " + tmp.string());
        write_u32(os, kCacheMagic);
        write_u32(os, kCacheVersion);
        write_u64(os, seq.split_seed);
        write_u32(os, std::uint32_t(seq.entity_names.size()));
        write_u32(os, std::uint32_t(seq.relation_names.size()));
        write_u32(os, std::uint32_t(seq.snapshots.size()));
        for (const auto& n : seq.entity_names) write_str(os, n);
        for (const auto& n : seq.relation_names) write_str(os, n);
        for (const auto& snap : seq.snapshots) {
            write_u32(os, std::uint32_t(snap.facts.size()));
            for (std::size_t i = 0; i < snap.facts.size(); ++i) {
                const auto& q = snap.facts[i];
                write_u32(os, q.s);
                write_u32(os, q.r);
                write_u32(os, q.o);
                os.put(char(snap.split[i]));
            }
        }
        if (!os) throw IoError("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

SnapshotSequence load_cache(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    if (read_u32(is) != kCacheMagic)
        throw IoError(path.string() + " is not a snapshot cache");
    std::uint32_t version = read_u32(is);
    if (version != kCacheVersion)
        throw IoError(path.string() + ": unsupported cache version " +
                      std::to_string(version));
    SnapshotSequence seq;
    seq.split_seed = read_u64(is);
    std::uint32_t n_ent = read_u32(is);
    std::uint32_t n_rel = read_u32(is);
    std::uint32_t n_steps = read_u32(is);
    seq.entity_names.reserve(n_ent);
    for (std::uint32_t i = 0; i < n_ent; ++i) seq.entity_names.push_back(read_str(is));
    seq.relation_names.reserve(n_rel);
    for (std::uint32_t i = 0; i < n_rel; ++i)
        seq.relation_names.push_back(read_str(is));
    seq.snapshots.resize(n_steps);
    for (std::uint32_t t = 1; t <= n_steps; ++t) {
        auto& snap = seq.snapshots[t - 1];
        snap.t = TimeStep(t);
        std::uint32_t n_facts = read_u32(is);
        snap.facts.reserve(n_facts);
        snap.split.reserve(n_facts);
        for (std::uint32_t i = 0; i < n_facts; ++i) {
            Quadruple q;
            q.s = read_u32(is);
            q.r = read_u32(is);
            q.o = read_u32(is);
            q.t = TimeStep(t);
            int sp = is.get();
            if (sp < 0 || sp > 2) throw IoError("corrupt split tag in cache");
            snap.facts.push_back(q);
            snap.split.push_back(Split(sp));
        }
    }
    seq.finalize();
    return seq;
}

std::vector<IntervalFact> parse_dataset_dir(const fs::path& dir) {
    std::vector<IntervalFact> all;
    auto absorb = [&](const fs::path& p, std::optional<Split> tag) {
        auto part = parse_interval_file(p);
        for (auto& f : part) {
            if (tag) {
                f.split = *tag;
                f.has_split = true;
            }
            all.push_back(std::move(f));
        }
    };
    if (fs::is_regular_file(dir)) {
        absorb(dir, std::nullopt);
        return all;
    }
    if (!fs::is_directory(dir)) throw IoError(dir.string() + " does not exist");
    if (fs::exists(dir / "train.txt")) {
        absorb(dir / "train.txt", Split::Train);
        if (fs::exists(dir / "valid.txt")) absorb(dir / "valid.txt", Split::Valid);
        if (fs::exists(dir / "test.txt")) absorb(dir / "test.txt", Split::Test);
        return all;
    }
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".txt")
            files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoError("no .txt files under " + dir.string());
    for (const auto& p : files) absorb(p, std::nullopt);
    return all;
}

}  // namespace tie
