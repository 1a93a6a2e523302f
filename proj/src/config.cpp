#include "fedsir/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "fedsir/rng.hpp"

namespace fedsir {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw std::invalid_argument(path + ": " + what);
}

double parse_double(const std::string& path, const std::string& v) {
    double out;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
        fail(path, "expected a real number, got '" + v + "'");
    }
    return out;
}

int parse_int(const std::string& path, const std::string& v) {
    int out;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
        fail(path, "expected an integer, got '" + v + "'");
    }
    return out;
}

std::uint64_t parse_u64(const std::string& path, const std::string& v) {
    std::uint64_t out;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
        fail(path, "expected a non-negative integer, got '" + v + "'");
    }
    return out;
}

bool parse_bool(const std::string& path, const std::string& v) {
    if (v == "true" || v == "on" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "off" || v == "no" || v == "0") return false;
    fail(path, "expected a boolean, got '" + v + "'");
}

std::string format_double(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    if (ec != std::errc{}) return "0";
    return std::string(buf, ptr);
}

// Every recognized key, applied in declaration order. Key application only
// stores values; cross-field validation happens once at the end.
struct KeyState {
    ParsedConfig* out;
    bool have_method = false;
    bool have_seed = false;
    bool have_data_seed = false;
};

using Apply = void (*)(KeyState&, const std::string& path,
                       const std::string& value);

struct KeySpec {
    const char* section;
    const char* key;
    Apply apply;
};

const KeySpec kKeys[] = {
    {"experiment", "method",
     [](KeyState& st, const std::string& p, const std::string& v) {
         if (v == "fedsir") st.out->experiment.method = Method::kFedSir;
         else if (v == "fedavg") st.out->experiment.method = Method::kFedAvg;
         else if (v == "pruning") st.out->experiment.method = Method::kPruning;
         else fail(p, "expected one of fedsir|fedavg|pruning, got '" + v + "'");
         st.have_method = true;
     }},
    {"experiment", "seed",
     [](KeyState& st, const std::string& p, const std::string& v) {
         st.out->experiment.rng_seed = parse_u64(p, v);
         st.have_seed = true;
     }},
    {"experiment", "rounds",
     [](KeyState& st, const std::string& p, const std::string& v) {
         st.out->experiment.rounds = parse_int(p, v);
     }},
    {"experiment", "relabel_period",
     [](KeyState& st, const std::string& p, const std::string& v) {
         st.out->experiment.relabel_period = parse_int(p, v);
     }},
    {"experiment", "residual_rank",
     [](KeyState& st, const std::string& p, const std::string& v) {
         st.out->experiment.residual_rank = parse_int(p, v);
     }},
    {"experiment", "heldout_fraction",
     [](KeyState& st, const std::string& p, const std::string& v) {
         st.out->experiment.heldout_fraction = parse_double(p, v);
     }},
    {"experiment", "enable_relabel",
     [](KeyState& st, const std::string& p, const std::string& v) {
         st.out->experiment.ablation.relabel = parse_bool(p, v);
     }},
    {"experiment", "enable_la",
     [](KeyState& st, const std::string& p, const std::string& v) {
         st.out->experiment.ablation.la = parse_bool(p, v);
     }},
    {"experiment", "enable_kd",
     [](KeyState& st, const std::string& p, const std::string& v) {
         st.out->experiment.ablation.kd = parse_bool(p, v);
     }},
    {"experiment", "enable_daagg",
     [](KeyState& st, const std::string& p, const std::string& v) {
         st.out->experiment.ablation.daagg = parse_bool(p, v);
     }},
    {"data", "num_clients",
     [](KeyState& st, const std::string& p, const std::string& v) {
         st.out->experiment.data.num_clients = parse_int(p, v);
     }},
    {"data", "num_classes",
     [](KeyState& st, const std::string& p, const std::string& v) {
         st.out->experiment.data.num_classes = parse_int(p, v);
     }},
    {"data", "samples_total",
     [](KeyState& st, const std::string& p, const std::string& v) {
         st.out->experiment.data.samples_total = parse_int(p, v);
     }},
    {"data", "input_dim",
     [](KeyState& st, const std::string& p, const std::string& v) {
         st.out->experiment.data.input_dim = parse_int(p, v);
     }},
    {"data", "dirichlet_concentration",
     [](KeyState& st, const std::string& p, const std::string& v) {
         st.out->experiment.data.dirichlet_concentration = parse_double(p, v);
     }},
    {"data", "noise_rate",
     [](KeyState& st, const std::string& p, const std::string& v) {
         st.out->experiment.data.noise_rate = parse_double(p, v);
     }},
    {"data", "clean_client_count",
     [](KeyState& st, const std::string& p, const std::string& v) {
         st.out->experiment.data.clean_client_count = parse_int(p, v);
     }},
    {"data", "class_separation",
     [](KeyState& st, const std::string& p, const std::string& v) {
         st.out->experiment.data.class_separation = parse_double(p, v);
     }},
    {"data", "seed",
     [](KeyState& st, const std::string& p, const std::string& v) {
         st.out->experiment.data.rng_seed = parse_u64(p, v);
         st.have_data_seed = true;
     }},
    {"data", "per_client_noise",
     [](KeyState& st, const std::string& p, const std::string& v) {
         std::vector<double> rates;
         std::stringstream ss(v);
         std::string item;
         while (std::getline(ss, item, ',')) {
             rates.push_back(parse_double(p, trim(item)));
         }
         st.out->experiment.data.per_client_noise = std::move(rates);
     }},
    {"data", "feature_file",
     [](KeyState& st, const std::string&, const std::string& v) {
         st.out->feature_file = v;
     }},
    {"model", "hidden_dim",
     [](KeyState& st, const std::string& p, const std::string& v) {
         st.out->experiment.hidden_dim = parse_int(p, v);
     }},
    {"model", "feature_dim",
     [](KeyState& st, const std::string& p, const std::string& v) {
         st.out->experiment.feature_dim = parse_int(p, v);
     }},
    {"stage1", "epochs",
     [](KeyState& st, const std::string& p, const std::string& v) {
         st.out->experiment.stage1.epochs = parse_int(p, v);
     }},
    {"stage1", "learning_rate",
     [](KeyState& st, const std::string& p, const std::string& v) {
         st.out->experiment.stage1.learning_rate = parse_double(p, v);
     }},
    {"stage1", "weight_decay",
     [](KeyState& st, const std::string& p, const std::string& v) {
         st.out->experiment.stage1.weight_decay = parse_double(p, v);
     }},
    {"stage1", "batch_size",
     [](KeyState& st, const std::string& p, const std::string& v) {
         st.out->experiment.stage1.batch_size = parse_int(p, v);
     }},
    {"stage1", "optimizer",
     [](KeyState& st, const std::string& p, const std::string& v) {
         if (v == "adam") st.out->experiment.stage1.optimizer = Optimizer::kAdam;
         else if (v == "sgd") st.out->experiment.stage1.optimizer = Optimizer::kSgd;
         else fail(p, "expected adam|sgd, got '" + v + "'");
     }},
    {"stage2", "epochs",
     [](KeyState& st, const std::string& p, const std::string& v) {
         st.out->experiment.stage2.epochs = parse_int(p, v);
     }},
    {"stage2", "learning_rate",
     [](KeyState& st, const std::string& p, const std::string& v) {
         st.out->experiment.stage2.learning_rate = parse_double(p, v);
     }},
    {"stage2", "weight_decay",
     [](KeyState& st, const std::string& p, const std::string& v) {
         st.out->experiment.stage2.weight_decay = parse_double(p, v);
     }},
    {"stage2", "batch_size",
     [](KeyState& st, const std::string& p, const std::string& v) {
         st.out->experiment.stage2.batch_size = parse_int(p, v);
     }},
    {"stage2", "optimizer",
     [](KeyState& st, const std::string& p, const std::string& v) {
         if (v == "adam") st.out->experiment.stage2.optimizer = Optimizer::kAdam;
         else if (v == "sgd") st.out->experiment.stage2.optimizer = Optimizer::kSgd;
         else fail(p, "expected adam|sgd, got '" + v + "'");
     }},
    {"la", "beta",
     [](KeyState& st, const std::string& p, const std::string& v) {
         st.out->experiment.la.beta = parse_double(p, v);
     }},
    {"la", "epsilon",
     [](KeyState& st, const std::string& p, const std::string& v) {
         st.out->experiment.la.epsilon = parse_double(p, v);
     }},
    {"kd", "temperature",
     [](KeyState& st, const std::string& p, const std::string& v) {
         st.out->experiment.kd.temperature = parse_double(p, v);
     }},
    {"kd", "weight",
     [](KeyState& st, const std::string& p, const std::string& v) {
         st.out->experiment.kd.kd_weight = parse_double(p, v);
     }},
    {"kd", "scale_by_temp_sq",
     [](KeyState& st, const std::string& p, const std::string& v) {
         st.out->experiment.kd.scale_by_temp_sq = parse_bool(p, v);
     }},
    {"spectral", "normalize_features",
     [](KeyState& st, const std::string& p, const std::string& v) {
         st.out->experiment.normalize_features = parse_bool(p, v);
     }},
    {"relabel", "weighting",
     [](KeyState& st, const std::string& p, const std::string& v) {
         if (v == "linear") {
             st.out->experiment.relabel_weighting = RelabelWeighting::kLinear;
         } else if (v == "sqrt") {
             st.out->experiment.relabel_weighting = RelabelWeighting::kSqrt;
         } else {
             fail(p, "expected linear|sqrt, got '" + v + "'");
         }
     }},
    {"identify", "excluded_as_clean",
     [](KeyState& st, const std::string& p, const std::string& v) {
         st.out->experiment.excluded_as_clean = parse_bool(p, v);
     }},
    {"aggregate", "rescale_distances",
     [](KeyState& st, const std::string& p, const std::string& v) {
         st.out->experiment.rescale_distances = parse_bool(p, v);
     }},
};

const KeySpec* find_key(const std::string& section, const std::string& key) {
    for (const KeySpec& spec : kKeys) {
        if (section == spec.section && key == spec.key) return &spec;
    }
    return nullptr;
}

void apply_key(KeyState& st, const std::string& section, const std::string& key,
               const std::string& value) {
    std::string path = section + "." + key;
    const KeySpec* spec = find_key(section, key);
    if (spec == nullptr) fail(path, "unknown key");
    spec->apply(st, path, value);
}

}  // namespace

ParsedConfig parse_config_text(const std::string& text) {
    ParsedConfig cfg;
    KeyState st{.out = &cfg};
    std::map<std::string, bool> seen;

    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#' || s[0] == ';') continue;
        // Trailing comments start at a comment marker preceded by whitespace.
        for (std::size_t i = 1; i < s.size(); ++i) {
            if ((s[i] == '#' || s[i] == ';') &&
                (s[i - 1] == ' ' || s[i - 1] == '\t')) {
                s = trim(s.substr(0, i));
                break;
            }
        }
        if (s.front() == '[') {
            if (s.back() != ']') {
                fail("line " + std::to_string(lineno), "unterminated section");
            }
            section = trim(s.substr(1, s.size() - 2));
            if (section.empty()) {
                fail("line " + std::to_string(lineno), "empty section name");
            }
            continue;
        }
        std::size_t eq = s.find('=');
        if (eq == std::string::npos) {
            fail("line " + std::to_string(lineno), "expected 'key = value'");
        }
        if (section.empty()) {
            fail("line " + std::to_string(lineno), "key before any [section]");
        }
        std::string key = trim(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));
        if (key.empty()) {
            fail("line " + std::to_string(lineno), "empty key");
        }
        std::string path = section + "." + key;
        if (seen.count(path) != 0) fail(path, "duplicate key");
        seen[path] = true;
        apply_key(st, section, key, value);
    }

    if (!st.have_method) fail("experiment.method", "required key missing");
    if (!st.have_seed) fail("experiment.seed", "required key missing");
    // The data stream gets its own seed derived from the experiment seed so
    // the two can also be decoupled explicitly.
    if (!st.have_data_seed) {
        cfg.experiment.data.rng_seed =
            derive_seed(cfg.experiment.rng_seed, "data");
    }
    cfg.experiment.validate();
    return cfg;
}

ParsedConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("cannot open config file: " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_config_text(buf.str());
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
}

std::string emit_config(const ParsedConfig& cfg) {
    const ExperimentConfig& e = cfg.experiment;
    std::ostringstream out;
    out << "[experiment]\n";
    out << "method = " << method_name(e.method) << "\n";
    out << "seed = " << e.rng_seed << "\n";
    out << "rounds = " << e.rounds << "\n";
    out << "relabel_period = " << e.relabel_period << "\n";
    out << "residual_rank = " << e.residual_rank << "\n";
    out << "heldout_fraction = " << format_double(e.heldout_fraction) << "\n";
    out << "enable_relabel = " << (e.ablation.relabel ? "true" : "false") << "\n";
    out << "enable_la = " << (e.ablation.la ? "true" : "false") << "\n";
    out << "enable_kd = " << (e.ablation.kd ? "true" : "false") << "\n";
    out << "enable_daagg = " << (e.ablation.daagg ? "true" : "false") << "\n";
    out << "\n[data]\n";
    out << "num_clients = " << e.data.num_clients << "\n";
    out << "num_classes = " << e.data.num_classes << "\n";
    out << "samples_total = " << e.data.samples_total << "\n";
    out << "input_dim = " << e.data.input_dim << "\n";
    out << "dirichlet_concentration = "
        << format_double(e.data.dirichlet_concentration) << "\n";
    out << "noise_rate = " << format_double(e.data.noise_rate) << "\n";
    out << "clean_client_count = " << e.data.clean_client_count << "\n";
    out << "class_separation = " << format_double(e.data.class_separation)
        << "\n";
    out << "seed = " << e.data.rng_seed << "\n";
    if (!e.data.per_client_noise.empty()) {
        out << "per_client_noise = ";
        for (std::size_t i = 0; i < e.data.per_client_noise.size(); ++i) {
            if (i > 0) out << ",";
            out << format_double(e.data.per_client_noise[i]);
        }
        out << "\n";
    }
    if (cfg.feature_file) out << "feature_file = " << *cfg.feature_file << "\n";
    out << "\n[model]\n";
    out << "hidden_dim = " << e.hidden_dim << "\n";
    out << "feature_dim = " << e.feature_dim << "\n";
    for (int stage = 1; stage <= 2; ++stage) {
        const LocalTrainConfig& t = stage == 1 ? e.stage1 : e.stage2;
        out << "\n[stage" << stage << "]\n";
        out << "epochs = " << t.epochs << "\n";
        out << "learning_rate = " << format_double(t.learning_rate) << "\n";
        out << "weight_decay = " << format_double(t.weight_decay) << "\n";
        out << "batch_size = " << t.batch_size << "\n";
        out << "optimizer = "
            << (t.optimizer == Optimizer::kAdam ? "adam" : "sgd") << "\n";
    }
    out << "\n[la]\n";
    out << "beta = " << format_double(e.la.beta) << "\n";
    out << "epsilon = " << format_double(e.la.epsilon) << "\n";
    out << "\n[kd]\n";
    out << "temperature = " << format_double(e.kd.temperature) << "\n";
    out << "weight = " << format_double(e.kd.kd_weight) << "\n";
    out << "scale_by_temp_sq = " << (e.kd.scale_by_temp_sq ? "true" : "false")
        << "\n";
    out << "\n[spectral]\n";
    out << "normalize_features = " << (e.normalize_features ? "true" : "false")
        << "\n";
    out << "\n[relabel]\n";
    out << "weighting = "
        << (e.relabel_weighting == RelabelWeighting::kLinear ? "linear" : "sqrt")
        << "\n";
    out << "\n[identify]\n";
    out << "excluded_as_clean = " << (e.excluded_as_clean ? "true" : "false")
        << "\n";
    out << "\n[aggregate]\n";
    out << "rescale_distances = " << (e.rescale_distances ? "true" : "false")
        << "\n";
    return out.str();
}

void set_master_seed(ParsedConfig& cfg, std::uint64_t seed) {
    cfg.experiment.rng_seed = seed;
    cfg.experiment.data.rng_seed = derive_seed(seed, "data");
}

void apply_override(ParsedConfig& cfg, const std::string& assignment) {
    std::size_t eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw std::invalid_argument("override '" + assignment +
                                    "': expected section.key=value");
    }
    std::string path = trim(assignment.substr(0, eq));
    std::string value = trim(assignment.substr(eq + 1));
    std::size_t dot = path.find('.');
    if (dot == std::string::npos || dot == 0 || dot == path.size() - 1) {
        throw std::invalid_argument("override '" + assignment +
                                    "': expected section.key=value");
    }
    KeyState st{.out = &cfg};
    st.have_method = true;
    st.have_seed = true;
    st.have_data_seed = true;
    apply_key(st, path.substr(0, dot), path.substr(dot + 1), value);
    cfg.experiment.validate();
}

}  // namespace fedsir
