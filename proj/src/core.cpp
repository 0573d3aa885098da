#include "tie/core.hpp"

#include <algorithm>
#include <stdexcept>

namespace tie {

const char* pattern_name(PatternShape p) {
    switch (p) {
        case PatternShape::SRO: return "sro";
        case PatternShape::SAnyO: return "s_o";
        case PatternShape::SRAny: return "sr_";
        case PatternShape::AnyRO: return "_ro";
        case PatternShape::SAnyAny: return "s__";
        case PatternShape::AnyAnyO: return "__o";
        case PatternShape::AnyRAny: return "_r_";
    }
    return "?";
}

void Snapshot::finalize() {
    fact_set.clear();
    objects_by_sr.clear();
    subjects_by_or.clear();
    entities.clear();
    relations.clear();

    std::unordered_set<EntityId> ents;
    std::unordered_set<RelationId> rels;
    fact_set.reserve(facts.size() * 2);
    for (const auto& q : facts) {
        fact_set.insert(q.triple());
        objects_by_sr[pack2(q.s, q.r)].push_back(q.o);
        subjects_by_or[pack2(q.o, q.r)].push_back(q.s);
        ents.insert(q.s);
        ents.insert(q.o);
        rels.insert(q.r);
    }
    entities.assign(ents.begin(), ents.end());
    relations.assign(rels.begin(), rels.end());
    std::sort(entities.begin(), entities.end());
    std::sort(relations.begin(), relations.end());
    for (auto& [k, v] : objects_by_sr) std::sort(v.begin(), v.end());
    for (auto& [k, v] : subjects_by_or) std::sort(v.begin(), v.end());
}

std::size_t Snapshot::count_objects(EntityId s, RelationId r) const {
    auto it = objects_by_sr.find(pack2(s, r));
    return it == objects_by_sr.end() ? 0 : it->second.size();
}

std::size_t Snapshot::count_subjects(EntityId o, RelationId r) const {
    auto it = subjects_by_or.find(pack2(o, r));
    return it == subjects_by_or.end() ? 0 : it->second.size();
}

std::vector<Quadruple> Snapshot::facts_in(Split which) const {
    std::vector<Quadruple> out;
    for (std::size_t i = 0; i < facts.size(); ++i)
        if (split[i] == which) out.push_back(facts[i]);
    return out;
}

const Snapshot& SnapshotSequence::at(TimeStep t) const {
    if (t < 1 || std::size_t(t) > snapshots.size())
        throw std::out_of_range("time step " + std::to_string(t) +
                                " outside [1, " +
                                std::to_string(snapshots.size()) + "]");
    return snapshots[std::size_t(t) - 1];
}

std::vector<EntityId> SnapshotSequence::known_entities(TimeStep t) const {
    at(t);  // range check
    std::vector<EntityId> out;
    for (EntityId e = 0; e < first_seen_entity.size(); ++e)
        if (first_seen_entity[e] != 0 && first_seen_entity[e] <= t)
            out.push_back(e);
    return out;
}

std::size_t SnapshotSequence::known_entity_count(TimeStep t) const {
    at(t);
    std::size_t n = 0;
    for (TimeStep f : first_seen_entity)
        if (f != 0 && f <= t) ++n;
    return n;
}

void SnapshotSequence::finalize() {
    first_seen_entity.assign(entity_names.size(), 0);
    first_seen_relation.assign(relation_names.size(), 0);
    for (auto& snap : snapshots) {
        snap.finalize();
        for (EntityId e : snap.entities)
            if (first_seen_entity[e] == 0) first_seen_entity[e] = snap.t;
        for (RelationId r : snap.relations)
            if (first_seen_relation[r] == 0) first_seen_relation[r] = snap.t;
    }
}

std::vector<Quadruple> added_facts(const SnapshotSequence& seq, TimeStep t) {
    const Snapshot& cur = seq.at(t);
    std::vector<Quadruple> out;
    if (t == 1) return cur.facts;
    const Snapshot& prev = seq.at(t - 1);
    for (const auto& q : cur.facts)
        if (!prev.contains(q.triple())) out.push_back(q);
    return out;
}

std::vector<Quadruple> added_facts(const SnapshotSequence& seq, TimeStep t,
                                   Split source) {
    const Snapshot& cur = seq.at(t);
    std::vector<Quadruple> out;
    for (std::size_t i = 0; i < cur.facts.size(); ++i) {
        if (cur.split[i] != source) continue;
        if (t == 1 || !seq.at(t - 1).contains(cur.facts[i].triple()))
            out.push_back(cur.facts[i]);
    }
    return out;
}

std::vector<Quadruple> deleted_facts(const TripleSet& buffer_triples,
                                     const Snapshot& current, TimeStep t) {
    std::vector<Quadruple> out;
    for (const Triple& tr : buffer_triples)
        if (!current.contains(tr)) out.push_back({tr.s, tr.r, tr.o, t});
    // Hash-set iteration order is unspecified; fix it for reproducibility.
    std::sort(out.begin(), out.end(), [](const Quadruple& a, const Quadruple& b) {
        return std::tie(a.s, a.r, a.o) < std::tie(b.s, b.r, b.o);
    });
    return out;
}

}  // namespace tie
