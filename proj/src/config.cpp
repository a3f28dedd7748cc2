#include "prpolab/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "prpolab/error.hpp"

namespace prpolab {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

[[noreturn]] void fail_at(int line, const std::string& msg) {
  if (line > 0) throw ConfigError("config line " + std::to_string(line) + ": " + msg);
  throw ConfigError("config override: " + msg);
}

double to_double(const std::string& v, int line) {
  if (v == "inf") return std::numeric_limits<double>::infinity();
  try {
    size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    fail_at(line, "expected a number, got '" + v + "'");
  }
}

int to_int(const std::string& v, int line) {
  try {
    size_t pos = 0;
    const long d = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return static_cast<int>(d);
  } catch (const std::exception&) {
    fail_at(line, "expected an integer, got '" + v + "'");
  }
}

uint64_t to_u64(const std::string& v, int line) {
  try {
    size_t pos = 0;
    const unsigned long long d = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    fail_at(line, "expected an unsigned integer, got '" + v + "'");
  }
}

std::vector<double> to_double_list(const std::string& v, int line) {
  std::vector<double> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(trim(item), line));
  return out;
}

std::vector<int> to_int_list(const std::string& v, int line) {
  std::vector<int> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_int(trim(item), line));
  return out;
}

std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string join_doubles(const std::vector<double>& vs) {
  std::string out;
  for (size_t i = 0; i < vs.size(); ++i) {
    if (i) out += ',';
    out += fmt_double(vs[i]);
  }
  return out;
}

std::string join_ints(const std::vector<int>& vs) {
  std::string out;
  for (size_t i = 0; i < vs.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(vs[i]);
  }
  return out;
}

void set_key(ExperimentConfig& cfg, const std::string& section, const std::string& key,
             const std::string& value, int line) {
  if (section == "policy") {
    if (key == "parameterization")
      cfg.parameterization = parameterization_from_string(value);
    else if (key == "init_scale")
      cfg.init_scale = to_double(value, line);
    else
      fail_at(line, "unknown key '" + key + "' in [policy]");
    return;
  }
  if (section == "env") {
    if (key == "kind")
      cfg.env.kind = suite_kind_from_string(value);
    else if (key == "sizes")
      cfg.env.sizes = to_int_list(value, line);
    else if (key == "vocab_size")
      cfg.env.vocab_size = to_int(value, line);
    else if (key == "max_len")
      cfg.env.max_len = to_int(value, line);
    else if (key == "dims")
      cfg.env.dims = to_int(value, line);
    else if (key == "seed")
      cfg.env.seed = to_u64(value, line);
    else if (key == "complement_c")
      cfg.env.complement_c = to_double(value, line);
    else if (key == "scale_factor")
      cfg.env.scale_factor = to_double(value, line);
    else if (key == "filler_token")
      cfg.env.filler_token = to_int(value, line);
    else
      fail_at(line, "unknown key '" + key + "' in [env]");
    return;
  }
  if (section == "algo") {
    if (key == "kind")
      cfg.algo.kind = algo_kind_from_string(value);
    else if (key == "epsilon")
      cfg.algo.epsilon = to_double(value, line);
    else if (key == "kl_coeff")
      cfg.algo.kl_coeff = to_double(value, line);
    else if (key == "lambda_k")
      cfg.algo.lambda_k = to_double_list(value, line);
    else if (key == "lambda_m")
      cfg.algo.lambda_m = to_double_list(value, line);
    else if (key == "partition_mode")
      cfg.algo.partition.mode = partition_mode_from_string(value);
    else if (key == "tau")
      cfg.algo.partition.tau = to_double(value, line);
    else if (key == "max_iter")
      cfg.algo.partition.max_iter = to_int(value, line);
    else if (key == "outlier_rule")
      cfg.algo.partition.outlier_rule = outlier_rule_from_string(value);
    else
      fail_at(line, "unknown key '" + key + "' in [algo]");
    return;
  }
  if (section == "run") {
    if (key == "name")
      cfg.name = value;
    else if (key == "preset")
      cfg.preset = reward_preset_from_string(value);
    else if (key == "switch_step")
      cfg.switch_step = to_int(value, line);
    else if (key == "group_size")
      cfg.group_size = to_int(value, line);
    else if (key == "steps")
      cfg.steps = to_int(value, line);
    else if (key == "lr")
      cfg.lr = to_double(value, line);
    else if (key == "inner_updates")
      cfg.inner_updates = to_int(value, line);
    else if (key == "seed")
      cfg.seed = to_u64(value, line);
    else if (key == "threads")
      cfg.threads = to_int(value, line);
    else
      fail_at(line, "unknown key '" + key + "' in [run]");
    return;
  }
  fail_at(line, "unknown section [" + section + "]");
}

}  // namespace

void ExperimentConfig::validate() const {
  if (name.empty()) throw ConfigError("run name must not be empty");
  for (char c : name)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_'))
      throw ConfigError("run name '" + name + "' may only use letters, digits, '-', '_'");
  env.validate();
  to_train_config();  // throws on any cross-field inconsistency
}

TrainConfig ExperimentConfig::to_train_config() const {
  TrainConfig tc;
  tc.tasks = make_task_suite(env);
  tc.policy.vocab_size = env.vocab_size;
  tc.policy.max_len = env.max_len;
  tc.policy.num_contexts = static_cast<int>(tc.tasks.size());
  tc.policy.parameterization = parameterization;
  tc.algo = algo;
  tc.preset = preset;
  tc.switch_step = switch_step;
  tc.group_size = group_size;
  tc.steps = steps;
  tc.lr = lr;
  tc.inner_updates = inner_updates;
  tc.init_scale = init_scale;
  tc.seed = seed;
  tc.threads = threads;
  tc.validate();
  return tc;
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::set<std::string> seen;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') fail_at(line_no, "unterminated section header");
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty()) fail_at(line_no, "empty section name");
      continue;
    }
    const size_t eq = t.find('=');
    if (eq == std::string::npos) fail_at(line_no, "expected 'key = value'");
    if (section.empty()) fail_at(line_no, "key outside any [section]");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) fail_at(line_no, "empty key");
    if (!seen.insert(section + "." + key).second)
      fail_at(line_no, "duplicate key '" + section + "." + key + "'");
    set_key(cfg, section, key, value, line_no);
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "[policy]\n";
  out << "parameterization = " << to_string(cfg.parameterization) << '\n';
  out << "init_scale = " << fmt_double(cfg.init_scale) << '\n';
  out << "\n[env]\n";
  out << "kind = " << to_string(cfg.env.kind) << '\n';
  out << "sizes = " << join_ints(cfg.env.sizes) << '\n';
  out << "vocab_size = " << cfg.env.vocab_size << '\n';
  out << "max_len = " << cfg.env.max_len << '\n';
  out << "dims = " << cfg.env.dims << '\n';
  out << "seed = " << cfg.env.seed << '\n';
  out << "complement_c = " << fmt_double(cfg.env.complement_c) << '\n';
  out << "scale_factor = " << fmt_double(cfg.env.scale_factor) << '\n';
  out << "filler_token = " << cfg.env.filler_token << '\n';
  out << "\n[algo]\n";
  out << "kind = " << to_string(cfg.algo.kind) << '\n';
  out << "epsilon = " << fmt_double(cfg.algo.epsilon) << '\n';
  out << "kl_coeff = " << fmt_double(cfg.algo.kl_coeff) << '\n';
  out << "lambda_k = " << join_doubles(cfg.algo.lambda_k) << '\n';
  out << "lambda_m = " << join_doubles(cfg.algo.lambda_m) << '\n';
  out << "partition_mode = " << to_string(cfg.algo.partition.mode) << '\n';
  out << "tau = " << fmt_double(cfg.algo.partition.tau) << '\n';
  out << "max_iter = " << cfg.algo.partition.max_iter << '\n';
  out << "outlier_rule = " << to_string(cfg.algo.partition.outlier_rule) << '\n';
  out << "\n[run]\n";
  out << "name = " << cfg.name << '\n';
  out << "preset = " << to_string(cfg.preset) << '\n';
  out << "switch_step = " << cfg.switch_step << '\n';
  out << "group_size = " << cfg.group_size << '\n';
  out << "steps = " << cfg.steps << '\n';
  out << "lr = " << fmt_double(cfg.lr) << '\n';
  out << "inner_updates = " << cfg.inner_updates << '\n';
  out << "seed = " << cfg.seed << '\n';
  out << "threads = " << cfg.threads << '\n';
  return out.str();
}

void apply_override(ExperimentConfig& cfg, const std::string& dotted_key,
                    const std::string& value) {
  const size_t dot = dotted_key.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == dotted_key.size())
    throw ConfigError("override key '" + dotted_key + "' must look like section.key");
  set_key(cfg, trim(dotted_key.substr(0, dot)), trim(dotted_key.substr(dot + 1)), trim(value), 0);
}

}  // namespace prpolab
