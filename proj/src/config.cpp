#include "eauwseg/config.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace eauwseg {

std::string to_string(SupervisionMode mode) {
    switch (mode) {
    case SupervisionMode::FullMask: return "full_mask";
    case SupervisionMode::BpannoBaseline: return "bpanno_baseline";
    case SupervisionMode::Eauwseg: return "eauwseg";
    case SupervisionMode::ScribblePce: return "scribble_pce";
    case SupervisionMode::Box: return "box";
    case SupervisionMode::Rectangle: return "rectangle";
    }
    return "unknown";
}

SupervisionMode parse_supervision_mode(const std::string& name) {
    for (auto m : {SupervisionMode::FullMask, SupervisionMode::BpannoBaseline, SupervisionMode::Eauwseg,
                   SupervisionMode::ScribblePce, SupervisionMode::Box, SupervisionMode::Rectangle}) {
        if (to_string(m) == name) return m;
    }
    throw Error(ErrorCode::InvalidConfig, "parse_config", "unknown supervision_mode '" + name + "'");
}

AnnotationKind required_annotation(SupervisionMode mode) {
    switch (mode) {
    case SupervisionMode::FullMask: return AnnotationKind::Mask;
    case SupervisionMode::BpannoBaseline:
    case SupervisionMode::Eauwseg: return AnnotationKind::Bpanno;
    case SupervisionMode::ScribblePce: return AnnotationKind::Scribble;
    case SupervisionMode::Box: return AnnotationKind::Box;
    case SupervisionMode::Rectangle: return AnnotationKind::Rectangle;
    }
    return AnnotationKind::Mask;
}

int TrainConfig::resolved_warmup() const {
    return warmup_epochs >= 0 ? warmup_epochs : epochs / 5;
}

void validate(const TrainConfig& c) {
    auto bad = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, "TrainConfig", msg); };
    if (c.epochs < 1) bad("epochs must be >= 1");
    if (c.resolved_warmup() >= c.epochs) bad("warmup_epochs must be < epochs");
    if (c.batch_size < 1) bad("batch_size must be >= 1");
    if (!(c.learning_rate > 0)) bad("learning_rate must be > 0");
    if (!(c.mu > 0)) bad("mu must be > 0");
    if (c.caps.anchors < 1 || c.caps.positives < 1 || c.caps.negatives < 1) bad("sample caps must be >= 1");
    validate(c.weights);
    validate(c.model);
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename V>
V parse_number(const std::string& key, const std::string& value) {
    V v{};
    const auto* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, v);
    if (ec != std::errc{} || ptr != end) {
        throw Error(ErrorCode::InvalidConfig, "parse_config", "bad value '" + value + "' for " + key);
    }
    return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw Error(ErrorCode::InvalidConfig, "parse_config", "bad boolean '" + value + "' for " + key);
}

std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
    return os.str();
}

const std::vector<std::string> kKeys = {
    "supervision_mode", "epochs", "warmup_epochs", "batch_size", "learning_rate", "lambda1", "lambda2",
    "tau", "eps", "mu", "max_anchors", "max_positives", "max_negatives", "hard_anchors", "use_ccg",
    "base_channels", "depth", "embed_dim", "seed",
};

} // namespace

std::vector<std::string> config_keys() { return kKeys; }

void apply_setting(TrainConfig& c, const std::string& key, const std::string& value) {
    if (key == "supervision_mode") c.mode = parse_supervision_mode(value);
    else if (key == "epochs") c.epochs = parse_number<int>(key, value);
    else if (key == "warmup_epochs") c.warmup_epochs = parse_number<int>(key, value);
    else if (key == "batch_size") c.batch_size = parse_number<int>(key, value);
    else if (key == "learning_rate") c.learning_rate = parse_number<double>(key, value);
    else if (key == "lambda1") c.weights.lambda1 = parse_number<double>(key, value);
    else if (key == "lambda2") c.weights.lambda2 = parse_number<double>(key, value);
    else if (key == "tau") c.weights.tau = parse_number<double>(key, value);
    else if (key == "eps") c.weights.eps = parse_number<double>(key, value);
    else if (key == "mu") c.mu = parse_number<double>(key, value);
    else if (key == "max_anchors") c.caps.anchors = parse_number<int>(key, value);
    else if (key == "max_positives") c.caps.positives = parse_number<int>(key, value);
    else if (key == "max_negatives") c.caps.negatives = parse_number<int>(key, value);
    else if (key == "hard_anchors") c.hard_anchors = parse_bool(key, value);
    else if (key == "use_ccg") c.use_ccg = parse_bool(key, value);
    else if (key == "base_channels") c.model.base_channels = parse_number<int>(key, value);
    else if (key == "depth") c.model.depth = parse_number<int>(key, value);
    else if (key == "embed_dim") c.model.embed_dim = parse_number<int>(key, value);
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
    else {
        throw Error(ErrorCode::InvalidConfig, "parse_config", "unknown key '" + key + "'");
    }
}

void apply_override(TrainConfig& c, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw Error(ErrorCode::InvalidConfig, "parse_config", "expected key=value, got '" + assignment + "'");
    }
    apply_setting(c, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

TrainConfig parse_config(const std::string& text, TrainConfig base) {
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        try {
            apply_override(base, line);
        } catch (const Error& e) {
            throw Error(e.code(), "parse_config", "line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return base;
}

TrainConfig load_config(const std::filesystem::path& path, TrainConfig base) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorCode::MissingFile, "load_config", path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str(), std::move(base));
}

std::string to_text(const TrainConfig& c) {
    std::ostringstream os;
    os << "supervision_mode=" << to_string(c.mode) << '\n'
       << "epochs=" << c.epochs << '\n'
       << "warmup_epochs=" << c.resolved_warmup() << '\n'
       << "batch_size=" << c.batch_size << '\n'
       << "learning_rate=" << format_double(c.learning_rate) << '\n'
       << "lambda1=" << format_double(c.weights.lambda1) << '\n'
       << "lambda2=" << format_double(c.weights.lambda2) << '\n'
       << "tau=" << format_double(c.weights.tau) << '\n'
       << "eps=" << format_double(c.weights.eps) << '\n'
       << "mu=" << format_double(c.mu) << '\n'
       << "max_anchors=" << c.caps.anchors << '\n'
       << "max_positives=" << c.caps.positives << '\n'
       << "max_negatives=" << c.caps.negatives << '\n'
       << "hard_anchors=" << (c.hard_anchors ? "true" : "false") << '\n'
       << "use_ccg=" << (c.use_ccg ? "true" : "false") << '\n'
       << "base_channels=" << c.model.base_channels << '\n'
       << "depth=" << c.model.depth << '\n'
       << "embed_dim=" << c.model.embed_dim << '\n'
       << "seed=" << c.seed << '\n';
    return os.str();
}

} // namespace eauwseg
