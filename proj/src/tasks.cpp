#include "plangen/tasks.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "plangen/errors.hpp"

namespace plangen::tasks {

// ---- Graph -----------------------------------------------------------------

void Graph::normalize() {
    for (auto& [u, v] : edges)
        if (u > v) std::swap(u, v);
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

std::vector<int> Graph::degrees() const {
    std::vector<int> deg(static_cast<size_t>(n) + 1, 0);
    for (const auto& [u, v] : edges) {
        ++deg[static_cast<size_t>(u)];
        ++deg[static_cast<size_t>(v)];
    }
    return deg;
}

bool Graph::all_degrees_even() const {
    auto deg = degrees();
    for (int i = 1; i <= n; ++i)
        if (deg[static_cast<size_t>(i)] % 2 != 0) return false;
    return true;
}

bool Graph::connected() const {
    if (n <= 0 || edges.empty()) return false;
    std::vector<std::vector<int>> adj(static_cast<size_t>(n) + 1);
    for (const auto& [u, v] : edges) {
        adj[static_cast<size_t>(u)].push_back(v);
        adj[static_cast<size_t>(v)].push_back(u);
    }
    std::vector<bool> seen(static_cast<size_t>(n) + 1, false);
    std::vector<int> stack = {1};
    seen[1] = true;
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        for (int w : adj[static_cast<size_t>(v)])
            if (!seen[static_cast<size_t>(w)]) {
                seen[static_cast<size_t>(w)] = true;
                stack.push_back(w);
            }
    }
    for (int i = 1; i <= n; ++i)
        if (!seen[static_cast<size_t>(i)]) return false;
    return true;
}

Graph gen_eulerian_graph(int n, Rng& rng) {
    if (n < 3) throw ContractError("gen_eulerian_graph: n >= 3 required");

    // Symmetric difference of simple cycles keeps every degree even; keep
    // composing until the result covers all nodes and is connected.
    std::set<std::pair<int, int>> edge_set;
    auto toggle = [&](int u, int v) {
        if (u > v) std::swap(u, v);
        auto it = edge_set.find({u, v});
        if (it != edge_set.end())
            edge_set.erase(it);
        else
            edge_set.insert({u, v});
    };

    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i + 1;

    Graph g;
    g.n = n;
    int attempts = 0;
    while (true) {
        int m = rng.uniform_int(3, n);
        rng.shuffle(order);
        for (int i = 0; i < m; ++i)
            toggle(order[static_cast<size_t>(i)], order[static_cast<size_t>((i + 1) % m)]);

        g.edges.assign(edge_set.begin(), edge_set.end());
        if (!g.edges.empty() && g.all_degrees_even() && g.connected()) break;
        if (++attempts > 64) {  // abandon a pathological run
            edge_set.clear();
            attempts = 0;
        }
    }
    g.normalize();
    return g;
}

std::vector<int> hierholzer(const Graph& g, int start) {
    if (!g.all_degrees_even() || !g.connected())
        throw ContractError("hierholzer: graph is not connected with even degrees");
    if (start < 1 || start > g.n)
        throw ContractError("hierholzer: start node " + std::to_string(start) +
                            " not in graph");

    // adjacency with shared edge ids; neighbor lists kept ascending
    std::vector<std::vector<std::pair<int, size_t>>> adj(static_cast<size_t>(g.n) + 1);
    for (size_t e = 0; e < g.edges.size(); ++e) {
        auto [u, v] = g.edges[e];
        adj[static_cast<size_t>(u)].push_back({v, e});
        adj[static_cast<size_t>(v)].push_back({u, e});
    }
    for (auto& lst : adj) std::sort(lst.begin(), lst.end());

    std::vector<bool> used(g.edges.size(), false);
    std::vector<size_t> next(static_cast<size_t>(g.n) + 1, 0);
    std::vector<int> stack = {start}, circuit;
    while (!stack.empty()) {
        int v = stack.back();
        auto& lst = adj[static_cast<size_t>(v)];
        size_t& cursor = next[static_cast<size_t>(v)];
        while (cursor < lst.size() && used[lst[cursor].second]) ++cursor;
        if (cursor < lst.size()) {
            used[lst[cursor].second] = true;
            stack.push_back(lst[cursor].first);
        } else {
            circuit.push_back(v);
            stack.pop_back();
        }
    }
    std::reverse(circuit.begin(), circuit.end());
    return circuit;
}

bool is_eulerian_circuit(const Graph& g, int start, const std::vector<int>& walk) {
    if (walk.size() != g.edges.size() + 1) return false;
    if (walk.front() != start || walk.back() != start) return false;
    std::multiset<std::pair<int, int>> remaining(g.edges.begin(), g.edges.end());
    for (size_t i = 0; i + 1 < walk.size(); ++i) {
        int u = walk[i], v = walk[i + 1];
        if (u < 1 || u > g.n || v < 1 || v > g.n) return false;
        if (u > v) std::swap(u, v);
        auto it = remaining.find({u, v});
        if (it == remaining.end()) return false;
        remaining.erase(it);
    }
    return remaining.empty();
}

// ---- Vocabulary --------------------------------------------------------------

int Vocabulary::id(const std::string& tok) const {
    auto it = index.find(tok);
    if (it == index.end()) throw VocabError("unknown token '" + tok + "'");
    return it->second;
}

const std::string& Vocabulary::name(int tid) const {
    if (tid < 0 || tid >= size())
        throw VocabError("token id " + std::to_string(tid) + " outside vocabulary");
    return tokens[static_cast<size_t>(tid)];
}

namespace {

Vocabulary build_vocab(const std::vector<std::string>& toks) {
    Vocabulary v;
    v.tokens = toks;
    for (int i = 0; i < v.size(); ++i) v.index[v.tokens[static_cast<size_t>(i)]] = i;
    auto find = [&](const char* t) {
        auto it = v.index.find(t);
        return it == v.index.end() ? -1 : it->second;
    };
    v.sep = find("SEP");
    v.start_marker = find("START");
    return v;
}

}  // namespace

Vocabulary Vocabulary::for_euler(int max_node) {
    std::vector<std::string> toks = {"PAD", "BOS", "EOS", "SEP", "START"};
    for (int i = 1; i <= max_node; ++i) toks.push_back(std::to_string(i));
    return build_vocab(toks);
}

Vocabulary Vocabulary::for_copy(int symbols) {
    std::vector<std::string> toks = {"PAD", "BOS", "EOS"};
    for (int i = 1; i <= symbols; ++i) toks.push_back(std::to_string(i));
    return build_vocab(toks);
}

// ---- instances -----------------------------------------------------------------

TaskInstance serialize_instance(const Graph& g, const std::vector<int>& circuit,
                                const Vocabulary& v, long id) {
    TaskInstance inst;
    inst.id = id;
    for (const auto& [a, b] : g.edges) {
        inst.source.push_back(v.id(std::to_string(a)));
        inst.source.push_back(v.id(std::to_string(b)));
        inst.source.push_back(v.sep);
    }
    inst.source.push_back(v.start_marker);
    inst.source.push_back(v.id(std::to_string(circuit.front())));
    for (int node : circuit) inst.target.push_back(v.id(std::to_string(node)));
    inst.target.push_back(v.eos);
    return inst;
}

bool parse_euler_source(const Vocabulary& v, const std::vector<int>& source, Graph* g,
                        int* start) {
    Graph out;
    size_t i = 0;
    while (i + 2 < source.size() && source[i] != v.start_marker) {
        if (source[i + 2] != v.sep) return false;
        int a = 0, b = 0;
        try {
            a = std::stoi(v.name(source[i]));
            b = std::stoi(v.name(source[i + 1]));
        } catch (...) {
            return false;
        }
        out.edges.push_back({a, b});
        out.n = std::max({out.n, a, b});
        i += 3;
    }
    if (i + 2 != source.size() || source[i] != v.start_marker) return false;
    try {
        *start = std::stoi(v.name(source[i + 1]));
    } catch (...) {
        return false;
    }
    out.normalize();
    *g = out;
    return true;
}

Dataset gen_euler_dataset(int nodes, int count, uint64_t seed) {
    Dataset d;
    d.task = "euler";
    d.vocab = Vocabulary::for_euler(nodes);
    Rng rng(seed);
    for (int i = 0; i < count; ++i) {
        Graph g = gen_eulerian_graph(nodes, rng);
        int start = rng.uniform_int(1, nodes);
        auto circuit = hierholzer(g, start);
        d.instances.push_back(serialize_instance(g, circuit, d.vocab, i));
        d.max_src_len =
            std::max(d.max_src_len, static_cast<int>(d.instances.back().source.size()));
    }
    return d;
}

Dataset gen_copy_dataset(int symbols, int min_len, int max_len, int count, bool reverse,
                         uint64_t seed) {
    if (symbols < 2) throw ContractError("gen_copy_dataset: vocab must be >= 2");
    if (min_len < 1 || min_len > max_len)
        throw ContractError("gen_copy_dataset: need 1 <= min_len <= max_len");
    Dataset d;
    d.task = reverse ? "reverse" : "copy";
    d.vocab = Vocabulary::for_copy(symbols);
    d.max_src_len = max_len;
    Rng rng(seed);
    for (int i = 0; i < count; ++i) {
        int len = rng.uniform_int(min_len, max_len);
        TaskInstance inst;
        inst.id = i;
        for (int j = 0; j < len; ++j)
            inst.source.push_back(d.vocab.id(std::to_string(rng.uniform_int(1, symbols))));
        inst.target = inst.source;
        if (reverse) std::reverse(inst.target.begin(), inst.target.end());
        inst.target.push_back(d.vocab.eos);
        d.instances.push_back(std::move(inst));
    }
    return d;
}

// ---- splits ----------------------------------------------------------------------

namespace {

void check_fractions(SplitFractions f) {
    if (f.train <= 0 || f.valid <= 0 || f.test <= 0 ||
        std::abs(f.train + f.valid + f.test - 1.0) > 1e-9)
        throw ConfigError("split: fractions must be positive and sum to 1");
}

Dataset with_instances(const Dataset& d, std::vector<TaskInstance> insts) {
    Dataset out;
    out.task = d.task;
    out.vocab = d.vocab;
    out.max_src_len = d.max_src_len;
    out.instances = std::move(insts);
    return out;
}

std::array<Dataset, 3> finalize_split(const Dataset& d, std::array<std::vector<TaskInstance>, 3> parts) {
    for (const auto& p : parts)
        if (p.empty())
            throw ConfigError("split: a split came out empty; need more data or larger fractions");
    return {with_instances(d, std::move(parts[0])), with_instances(d, std::move(parts[1])),
            with_instances(d, std::move(parts[2]))};
}

}  // namespace

std::array<Dataset, 3> split_dataset(const Dataset& d, SplitFractions f, uint64_t seed) {
    check_fractions(f);
    std::vector<size_t> order(d.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);

    size_t n = d.size();
    size_t n_train = static_cast<size_t>(f.train * static_cast<double>(n));
    size_t n_valid = static_cast<size_t>(f.valid * static_cast<double>(n));
    std::array<std::vector<TaskInstance>, 3> parts;
    for (size_t i = 0; i < n; ++i) {
        int slot = i < n_train ? 0 : (i < n_train + n_valid ? 1 : 2);
        parts[static_cast<size_t>(slot)].push_back(d.instances[order[i]]);
    }
    return finalize_split(d, std::move(parts));
}

std::array<Dataset, 3> split_euler_dataset(const Dataset& d, SplitFractions f, uint64_t seed) {
    check_fractions(f);

    // Group by edge set (the part of the source before START); if the task
    // space is too small for a graph-disjoint split, group by the whole
    // source so test instances are at least never seen verbatim.
    auto group_key = [&](const TaskInstance& inst, bool edge_only) {
        std::ostringstream os;
        for (int tok : inst.source) {
            if (edge_only && tok == d.vocab.start_marker) break;
            os << tok << ",";
        }
        return os.str();
    };

    std::map<std::string, std::vector<size_t>> groups;
    for (size_t i = 0; i < d.size(); ++i) groups[group_key(d.instances[i], true)].push_back(i);
    constexpr size_t kMinGraphGroups = 12;
    if (groups.size() < kMinGraphGroups) {
        groups.clear();
        for (size_t i = 0; i < d.size(); ++i)
            groups[group_key(d.instances[i], false)].push_back(i);
    }

    std::vector<const std::vector<size_t>*> group_list;
    group_list.reserve(groups.size());
    for (const auto& [key, members] : groups) group_list.push_back(&members);
    Rng rng(seed);
    rng.shuffle(group_list);

    const double total = static_cast<double>(d.size());
    std::array<std::vector<TaskInstance>, 3> parts;
    size_t assigned = 0;
    for (const auto* members : group_list) {
        double frac = static_cast<double>(assigned) / total;
        int slot = frac < f.train ? 0 : (frac < f.train + f.valid ? 1 : 2);
        for (size_t idx : *members) parts[static_cast<size_t>(slot)].push_back(d.instances[idx]);
        assigned += members->size();
    }
    return finalize_split(d, std::move(parts));
}

// ---- file io ---------------------------------------------------------------------

void save_dataset(const std::string& path, const Dataset& d) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write dataset file '" + path + "'");
    out << "# task=" << d.task << " max_src_len=" << d.max_src_len << " vocab=";
    for (int i = 0; i < d.vocab.size(); ++i)
        out << (i ? " " : "") << d.vocab.tokens[static_cast<size_t>(i)];
    out << "\n";
    for (const auto& inst : d.instances) {
        for (size_t i = 0; i < inst.source.size(); ++i)
            out << (i ? " " : "") << d.vocab.name(inst.source[i]);
        out << "\t";
        for (size_t i = 0; i < inst.target.size(); ++i)
            out << (i ? " " : "") << d.vocab.name(inst.target[i]);
        out << "\n";
    }
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open dataset file '" + path + "'");
    std::string header;
    if (!std::getline(in, header) || header.rfind("# ", 0) != 0)
        throw ConfigError("dataset '" + path + "': missing header line");

    Dataset d;
    std::istringstream hs(header.substr(2));
    std::string field;
    std::vector<std::string> vocab_tokens;
    bool in_vocab = false;
    while (hs >> field) {
        if (field.rfind("task=", 0) == 0) {
            d.task = field.substr(5);
            in_vocab = false;
        } else if (field.rfind("max_src_len=", 0) == 0) {
            d.max_src_len = std::stoi(field.substr(12));
            in_vocab = false;
        } else if (field.rfind("vocab=", 0) == 0) {
            vocab_tokens.push_back(field.substr(6));
            in_vocab = true;
        } else if (in_vocab) {
            vocab_tokens.push_back(field);
        }
    }
    if (d.task.empty() || vocab_tokens.size() < 3)
        throw ConfigError("dataset '" + path + "': malformed header");
    d.vocab = build_vocab(vocab_tokens);

    std::string line;
    long id = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw ConfigError("dataset '" + path + "': line without TAB separator");
        TaskInstance inst;
        inst.id = id++;
        std::istringstream ss(line.substr(0, tab));
        std::string tok;
        while (ss >> tok) inst.source.push_back(d.vocab.id(tok));
        std::istringstream ts(line.substr(tab + 1));
        while (ts >> tok) inst.target.push_back(d.vocab.id(tok));
        if (inst.target.empty())
            throw ConfigError("dataset '" + path + "': instance with empty target");
        d.instances.push_back(std::move(inst));
    }
    return d;
}

}  // namespace plangen::tasks
