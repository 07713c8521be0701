#pragma once

#include <array>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "plangen/rng.hpp"

namespace plangen::tasks {

// Simple undirected graph, 1-based node labels. Edges are stored
// canonically: (u, v) with u < v, sorted lexicographically, no duplicates.
struct Graph {
    int n = 0;
    std::vector<std::pair<int, int>> edges;

    void normalize();
    std::vector<int> degrees() const;  // index 1..n
    bool all_degrees_even() const;
    bool connected() const;  // every node reachable (isolated nodes fail)
};

// Random connected graph with all degrees even (an Eulerian circuit exists),
// built as a symmetric difference of random simple cycles.
Graph gen_eulerian_graph(int n, Rng& rng);

// Eulerian circuit from `start`, unused incident edges taken in ascending
// neighbor order. Throws ContractError if the graph invariants do not hold.
std::vector<int> hierholzer(const Graph& g, int start);

// True when `walk` starts and ends at `start` and traverses every edge of g
// exactly once.
bool is_eulerian_circuit(const Graph& g, int start, const std::vector<int>& walk);

struct Vocabulary {
    std::vector<std::string> tokens;
    std::unordered_map<std::string, int> index;
    int pad = 0, bos = 1, eos = 2;
    int sep = -1;           // euler only
    int start_marker = -1;  // euler only

    int size() const { return static_cast<int>(tokens.size()); }
    int id(const std::string& tok) const;
    const std::string& name(int id) const;

    static Vocabulary for_euler(int max_node);
    static Vocabulary for_copy(int symbols);
};

struct TaskInstance {
    std::vector<int> source;
    std::vector<int> target;  // EOS-terminated
    long id = 0;
};

struct Dataset {
    std::string task;  // euler | copy | reverse
    Vocabulary vocab;
    int max_src_len = 0;  // across all splits of the generation run
    std::vector<TaskInstance> instances;

    size_t size() const { return instances.size(); }
};

// Source: "u v SEP" per edge (sorted), then "START s". Target: circuit
// nodes, EOS-terminated. Source length is always 3*|edges| + 2.
TaskInstance serialize_instance(const Graph& g, const std::vector<int>& circuit,
                                const Vocabulary& v, long id);

// Inverse of the source encoding; returns false on malformed input.
bool parse_euler_source(const Vocabulary& v, const std::vector<int>& source, Graph* g,
                        int* start);

Dataset gen_euler_dataset(int nodes, int count, uint64_t seed);
Dataset gen_copy_dataset(int symbols, int min_len, int max_len, int count, bool reverse,
                         uint64_t seed);

struct SplitFractions {
    double train = 0.8, valid = 0.1, test = 0.1;
};

// Seeded disjoint partition of the instance list.
std::array<Dataset, 3> split_dataset(const Dataset& d, SplitFractions f, uint64_t seed);

// Euler-aware split: partitions by edge-set identity so test graphs are
// unseen during training. Node counts with too few distinct graphs (n=4 has
// only three) fall back to partitioning by distinct (graph, start) sources.
std::array<Dataset, 3> split_euler_dataset(const Dataset& d, SplitFractions f, uint64_t seed);

void save_dataset(const std::string& path, const Dataset& d);
Dataset load_dataset(const std::string& path);

}  // namespace plangen::tasks
