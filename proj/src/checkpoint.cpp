#include "popgo/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "popgo/hashing.hpp"

namespace popgo {

namespace {

constexpr char kModelMagic[8] = {'P', 'O', 'P', 'G', 'O', 'C', 'K', 'P'};
constexpr std::uint32_t kModelVersion = 1;

static_assert(sizeof(float) == 4, "checkpoint format requires 32-bit float");

void write_table(std::ofstream& out, const EmbeddingTable& t) {
    std::vector<float> buf(t.values.size());
    for (std::size_t p = 0; p < t.values.size(); ++p) buf[p] = static_cast<float>(t.values[p]);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

EmbeddingTable read_table(std::ifstream& in, int rows, int dim, const std::string& path) {
    EmbeddingTable t(rows, dim);
    std::vector<float> buf(t.values.size());
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!in) throw std::runtime_error(path + ": truncated table data");
    for (std::size_t p = 0; p < buf.size(); ++p) t.values[p] = buf[p];
    return t;
}

}  // namespace

void save_model(const std::string& path, const Model& m, const std::string& manifest_name) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(kModelMagic, sizeof(kModelMagic));
    std::uint32_t version = kModelVersion;
    std::uint8_t arch = m.arch == Arch::MF ? 0 : 1;
    std::uint32_t layers = static_cast<std::uint32_t>(m.n_layers);
    std::uint8_t kind = m.score_kind == ScoreKind::Cosine
                            ? 0
                            : (m.score_kind == ScoreKind::Inner ? 1 : 2);
    std::uint32_t urows = static_cast<std::uint32_t>(m.user_table.rows);
    std::uint32_t irows = static_cast<std::uint32_t>(m.item_table.rows);
    std::uint32_t dim = static_cast<std::uint32_t>(m.user_table.dim);
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    out.write(reinterpret_cast<const char*>(&arch), sizeof(arch));
    out.write(reinterpret_cast<const char*>(&layers), sizeof(layers));
    out.write(reinterpret_cast<const char*>(&kind), sizeof(kind));
    out.write(reinterpret_cast<const char*>(&urows), sizeof(urows));
    out.write(reinterpret_cast<const char*>(&irows), sizeof(irows));
    out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
    write_table(out, m.user_table);
    write_table(out, m.item_table);
    if (!out) throw std::runtime_error("write failed for " + path);
    out.close();

    std::filesystem::path p(path);
    std::ofstream man((p.parent_path() / manifest_name).string());
    if (man) {
        man << "file=" << p.filename().string() << '\n'
            << "format_version=" << kModelVersion << '\n'
            << "arch=" << to_string(m.arch) << '\n'
            << "n_layers=" << m.n_layers << '\n'
            << "score_kind=" << to_string(m.score_kind) << '\n'
            << "user_rows=" << m.user_table.rows << '\n'
            << "item_rows=" << m.item_table.rows << '\n'
            << "dim=" << m.user_table.dim << '\n'
            << "param_hash=" << hex_string(param_hash(m)) << '\n';
    }
}

Model load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kModelMagic, sizeof(magic)) != 0) {
        throw std::runtime_error(path + ": not a model checkpoint");
    }
    std::uint32_t version = 0, layers = 0, urows = 0, irows = 0, dim = 0;
    std::uint8_t arch = 0, kind = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    in.read(reinterpret_cast<char*>(&arch), sizeof(arch));
    in.read(reinterpret_cast<char*>(&layers), sizeof(layers));
    in.read(reinterpret_cast<char*>(&kind), sizeof(kind));
    in.read(reinterpret_cast<char*>(&urows), sizeof(urows));
    in.read(reinterpret_cast<char*>(&irows), sizeof(irows));
    in.read(reinterpret_cast<char*>(&dim), sizeof(dim));
    if (!in) throw std::runtime_error(path + ": truncated header");
    if (version != kModelVersion) {
        throw std::runtime_error(path + ": unsupported checkpoint version " +
                                 std::to_string(version));
    }
    Model m;
    m.arch = arch == 0 ? Arch::MF : Arch::LightGCN;
    m.n_layers = static_cast<int>(layers);
    m.score_kind = kind == 0 ? ScoreKind::Cosine
                             : (kind == 1 ? ScoreKind::Inner : ScoreKind::SigmoidInner);
    m.user_table = read_table(in, static_cast<int>(urows), static_cast<int>(dim), path);
    m.item_table = read_table(in, static_cast<int>(irows), static_cast<int>(dim), path);
    return m;
}

void save_pop_vocab(const std::string& path, const std::vector<int>& freq_values) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (std::size_t c = 0; c < freq_values.size(); ++c) {
        out << freq_values[c] << '\t' << c << '\n';
    }
}

std::vector<int> load_pop_vocab(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<int> values;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::size_t tab = line.find('\t');
        if (tab == std::string::npos) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected frequency<TAB>category");
        }
        int freq = std::stoi(line.substr(0, tab));
        int cat = std::stoi(line.substr(tab + 1));
        if (cat != static_cast<int>(values.size())) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": categories must be dense and ascending");
        }
        values.push_back(freq);
    }
    return values;
}

void save_shortcut(const std::string& dir, const ShortcutModel& sm) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    save_model(dir + "/shortcut.ckpt", sm.inner, "shortcut_manifest.txt");
    save_pop_vocab(dir + "/user_pop_vocab.txt", sm.pops.user_freq_values);
    save_pop_vocab(dir + "/item_pop_vocab.txt", sm.pops.item_freq_values);
}

ShortcutModel load_shortcut(const std::string& dir, const std::vector<Interaction>& train,
                            int n_users, int n_items, const NormalizedAdjacency* graph) {
    Model inner = load_model(dir + "/shortcut.ckpt");
    ShortcutModel sm;
    sm.pops = build_popularity_table(train, n_users, n_items);
    sm.pops.user_freq_values = load_pop_vocab(dir + "/user_pop_vocab.txt");
    sm.pops.item_freq_values = load_pop_vocab(dir + "/item_pop_vocab.txt");
    sm.pops.user_freq_vocab.clear();
    sm.pops.item_freq_vocab.clear();
    for (std::size_t c = 0; c < sm.pops.user_freq_values.size(); ++c) {
        sm.pops.user_freq_vocab.emplace(sm.pops.user_freq_values[c], static_cast<int>(c));
    }
    for (std::size_t c = 0; c < sm.pops.item_freq_values.size(); ++c) {
        sm.pops.item_freq_vocab.emplace(sm.pops.item_freq_values[c], static_cast<int>(c));
    }
    if (inner.user_table.rows != static_cast<int>(sm.pops.user_freq_values.size()) ||
        inner.item_table.rows != static_cast<int>(sm.pops.item_freq_values.size())) {
        throw std::runtime_error(dir + ": vocabulary size does not match checkpoint tables");
    }
    if (inner.arch == Arch::LightGCN) {
        if (graph == nullptr) {
            throw std::runtime_error(dir + ": LightGCN shortcut needs the train adjacency");
        }
        inner.graph = *graph;
    }
    sm.inner = std::move(inner);
    sm.user_cat.resize(n_users);
    sm.item_cat.resize(n_items);
    for (int u = 0; u < n_users; ++u) {
        sm.user_cat[u] = frequency_category(sm.pops.user_freq_values, sm.pops.user_pop[u]);
    }
    for (int i = 0; i < n_items; ++i) {
        sm.item_cat[i] = frequency_category(sm.pops.item_freq_values, sm.pops.item_pop[i]);
    }
    freeze(sm);
    return sm;
}

}  // namespace popgo
