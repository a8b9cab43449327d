#include "colarec/config.hpp"

#include <charconv>
#include <cstdio>
#include <set>
#include <sstream>

#include "colarec/error.hpp"
#include "colarec/io.hpp"
#include "colarec/text.hpp"

namespace colarec {

namespace {

using V = ValueType;

std::vector<ConfigKey> make_schema() {
    return {
        {"run", V::text, "run", "run directory holding every stage artifact", true},
        {"seed", V::integer, "0", "seed shared by all randomized stages"},
        {"precision", V::integer, "32", "scalar width for the model: 32 or 64"},

        {"interactions", V::text, "", "raw user<TAB>item file for prepare", true},
        {"content", V::text, "", "raw item content file for prepare", true},
        {"data_dir", V::text, "", "prepared data directory (default <run>/data)", true},
        {"cf_ckpt", V::text, "", "CF embedding checkpoint (default <run>/cf.ckpt)", true},
        {"gids_path", V::text, "", "GID file (default <run>/gids.tsv)", true},
        {"model_ckpt", V::text, "", "model checkpoint (default <run>/model.ckpt)", true},
        {"report_path", V::text, "", "evaluation report (default <run>/report.tsv)", true},
        {"sweep_path", V::text, "", "sweep table (default <run>/sweep.tsv)", true},

        {"min_degree", V::integer, "5", "k-core threshold"},
        {"split", V::text, "8,1,1", "train,val,test ratios"},

        {"synth_users", V::integer, "50", "synthetic users"},
        {"synth_items", V::integer, "40", "synthetic items"},
        {"synth_clusters", V::integer, "4", "planted clusters"},
        {"synth_p_in", V::real, "0.5", "edge probability inside a cluster"},
        {"synth_p_out", V::real, "0.02", "edge probability across clusters"},

        {"cf_dim", V::integer, "512", "LightGCN embedding size"},
        {"cf_layers", V::integer, "3", "LightGCN propagation layers"},
        {"cf_epochs", V::integer, "200", "LightGCN epochs"},
        {"cf_batch_size", V::integer, "1024", "LightGCN BPR batch size"},
        {"cf_lr", V::real, "0.001", "LightGCN Adam learning rate"},
        {"cf_reg", V::real, "0.0001", "L2 weight on layer-0 embeddings"},

        {"strategy", V::text, "collaborative", "collaborative | content | random | iad"},
        {"gid_length", V::integer, "3", "GID length l"},
        {"clusters", V::integer, "32", "tokens per position K"},
        {"kmeans_restarts", V::integer, "4", "k-means++ restarts per clustering"},
        {"kmeans_iterations", V::integer, "100", "Lloyd iteration cap"},

        {"dim", V::integer, "32", "model width m"},
        {"heads", V::integer, "4", "attention heads"},
        {"ff_dim", V::integer, "64", "feed-forward width"},
        {"encoder_layers", V::integer, "2", "encoder layers"},
        {"decoder_layers", V::integer, "2", "decoder layers"},
        {"max_len", V::integer, "256", "input length cap in tokens"},
        {"init_scale", V::real, "1.0", "multiplier on initial weights"},
        {"items_per_user", V::integer, "20", "item tuples sampled into a user input"},
        {"use_content", V::boolean, "true", "include attribute text in item tuples"},

        {"lr", V::real, "0.0005", "AdamW learning rate"},
        {"weight_decay", V::real, "0.01", "AdamW decoupled weight decay"},
        {"batch_size", V::integer, "128", "training batch size"},
        {"epochs", V::integer, "200", "maximum training epochs"},
        {"patience", V::integer, "15", "epochs without val Recall@5 gain before stopping"},
        {"validate", V::boolean, "true", "per-epoch validation and best-epoch restore"},
        {"alpha", V::real, "0.02", "weight of the contrastive term"},
        {"loss_rec", V::boolean, "true", "enable the recommendation loss"},
        {"loss_index", V::boolean, "true", "enable the indexing loss"},
        {"loss_bpr", V::boolean, "true", "enable the BPR loss"},
        {"loss_contrastive", V::boolean, "true", "enable the contrastive loss"},

        {"beam", V::integer, "30", "beam width"},
        {"topn", V::integer, "20", "items returned by recommend"},
        {"repeats", V::integer, "3", "evaluation repeats with distinct sampling seeds"},

        {"axis", V::text, "", "sweep axis: gid-length | clusters | gid-type | ablation | variants"},
        {"values", V::text, "", "comma-separated sweep values"},
    };
}

void check_value(const ConfigKey& key, const std::string& value) {
    const auto bad = [&](const char* what) {
        throw Error(ErrorKind::config, "key '" + key.name + "' expects " + what + ", got '" + value + "'");
    };
    switch (key.type) {
        case V::integer: {
            std::int64_t v = 0;
            const auto* end = value.data() + value.size();
            const auto [ptr, ec] = std::from_chars(value.data(), end, v);
            if (value.empty() || ec != std::errc() || ptr != end) bad("an integer");
            break;
        }
        case V::real: {
            double v = 0.0;
            const auto* end = value.data() + value.size();
            const auto [ptr, ec] = std::from_chars(value.data(), end, v);
            if (value.empty() || ec != std::errc() || ptr != end) bad("a number");
            break;
        }
        case V::boolean:
            if (value != "true" && value != "false" && value != "1" && value != "0") bad("true or false");
            break;
        case V::text: break;
    }
}

}  // namespace

const std::vector<ConfigKey>& config_schema() {
    static const std::vector<ConfigKey> schema = make_schema();
    return schema;
}

const ConfigKey* find_config_key(std::string_view name) {
    for (const auto& k : config_schema()) {
        if (k.name == name) return &k;
    }
    return nullptr;
}

std::string kebab(std::string_view key) {
    std::string out(key);
    for (auto& c : out) {
        if (c == '_') c = '-';
    }
    return out;
}

RunConfig::RunConfig() {
    for (const auto& k : config_schema()) values_[k.name] = k.default_value;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    const ConfigKey* k = find_config_key(key);
    if (k == nullptr) throw Error(ErrorKind::config, "unknown config key '" + key + "'");
    check_value(*k, value);
    values_[key] = value;
}

void RunConfig::merge_file(const std::filesystem::path& path) {
    io::require_file(path, "config file");
    std::set<std::string> seen;
    io::for_each_line(path, [&](std::size_t line_no, std::string_view line) {
        const auto text = io::trim(line);
        if (text.empty() || text.front() == '#') return;
        const auto eq = text.find('=');
        const auto where = path.string() + ": line " + std::to_string(line_no) + ": ";
        if (eq == std::string_view::npos) throw Error(ErrorKind::config, where + "expected key = value");
        const std::string key(io::trim(text.substr(0, eq)));
        const std::string value(io::trim(text.substr(eq + 1)));
        if (!seen.insert(key).second) throw Error(ErrorKind::config, where + "key '" + key + "' repeated");
        try {
            set(key, value);
        } catch (const Error& e) {
            throw Error(ErrorKind::config, where + e.what());
        }
    });
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
    RunConfig c;
    c.merge_file(path);
    return c;
}

const std::string& RunConfig::raw(const std::string& key, ValueType type) const {
    const ConfigKey* k = find_config_key(key);
    if (k == nullptr) throw Error(ErrorKind::config, "unknown config key '" + key + "'");
    if (k->type != type) throw Error(ErrorKind::config, "config key '" + key + "' read with the wrong type");
    return values_.at(key);
}

const std::string& RunConfig::text(const std::string& key) const { return raw(key, V::text); }

std::int64_t RunConfig::integer(const std::string& key) const {
    const auto& s = raw(key, V::integer);
    std::int64_t v = 0;
    std::from_chars(s.data(), s.data() + s.size(), v);
    return v;
}

std::size_t RunConfig::count(const std::string& key) const {
    const auto v = integer(key);
    if (v < 0) throw Error(ErrorKind::config, "key '" + key + "' must be >= 0, got " + std::to_string(v));
    return static_cast<std::size_t>(v);
}

double RunConfig::real(const std::string& key) const {
    const auto& s = raw(key, V::real);
    double v = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), v);
    return v;
}

bool RunConfig::flag(const std::string& key) const {
    const auto& s = raw(key, V::boolean);
    return s == "true" || s == "1";
}

std::string RunConfig::to_text() const {
    std::ostringstream out;
    for (const auto& k : config_schema()) {
        if (!k.is_path) out << k.name << " = " << values_.at(k.name) << "\n";
    }
    return out.str();
}

std::string RunConfig::hash() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(to_text())));
    return buf;
}

}  // namespace colarec
