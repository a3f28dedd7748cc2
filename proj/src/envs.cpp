#include "prpolab/envs.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "prpolab/error.hpp"
#include "prpolab/rng.hpp"

namespace prpolab {

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("task suite: bad numeric value '" + s + "' for " + what);
  }
}

}  // namespace

double RewardRule::range_lo() const {
  switch (kind) {
    case RewardKind::Accuracy:
    case RewardKind::Format:
      return 0.0;
    case RewardKind::Complement:
      return scale * (complement_c - 1.0);
  }
  return 0.0;
}

double RewardRule::range_hi() const {
  switch (kind) {
    case RewardKind::Accuracy:
    case RewardKind::Format:
      return scale;
    case RewardKind::Complement:
      return scale * complement_c;
  }
  return 0.0;
}

std::string RewardRule::to_string() const {
  switch (kind) {
    case RewardKind::Accuracy:
      return "accuracy:scale=" + format_double(scale);
    case RewardKind::Format:
      return "format:token=" + std::to_string(filler_token) + ",scale=" + format_double(scale);
    case RewardKind::Complement:
      return "complement:c=" + format_double(complement_c) + ",scale=" + format_double(scale);
  }
  throw InvariantError("unreachable reward kind");
}

RewardRule RewardRule::parse(const std::string& text) {
  const size_t colon = text.find(':');
  const std::string name = text.substr(0, colon);
  RewardRule rule;
  if (name == "accuracy")
    rule.kind = RewardKind::Accuracy;
  else if (name == "format")
    rule.kind = RewardKind::Format;
  else if (name == "complement")
    rule.kind = RewardKind::Complement;
  else
    throw ConfigError("task suite: unknown reward rule '" + name + "'");

  if (colon == std::string::npos) return rule;
  std::stringstream args(text.substr(colon + 1));
  std::string kv;
  while (std::getline(args, kv, ',')) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("task suite: bad rule argument '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    const std::string val = kv.substr(eq + 1);
    if (key == "scale")
      rule.scale = parse_double(val, "scale");
    else if (key == "c")
      rule.complement_c = parse_double(val, "c");
    else if (key == "token")
      rule.filler_token = static_cast<int>(parse_double(val, "token"));
    else
      throw ConfigError("task suite: unknown rule argument '" + key + "'");
  }
  return rule;
}

std::string to_string(SuiteKind k) {
  switch (k) {
    case SuiteKind::Basic: return "basic";
    case SuiteKind::Interference: return "interference";
    case SuiteKind::ScaleConflict: return "scale-conflict";
    case SuiteKind::Mixed: return "mixed";
  }
  throw InvariantError("unreachable suite kind");
}

SuiteKind suite_kind_from_string(const std::string& s) {
  if (s == "basic") return SuiteKind::Basic;
  if (s == "interference") return SuiteKind::Interference;
  if (s == "scale-conflict") return SuiteKind::ScaleConflict;
  if (s == "mixed") return SuiteKind::Mixed;
  throw ConfigError("unknown suite kind '" + s + "'");
}

void SuiteConfig::validate() const {
  if (sizes.empty()) throw ConfigError("task suite: sizes must declare at least one capability");
  for (size_t m = 0; m < sizes.size(); ++m)
    if (sizes[m] < 1)
      throw ConfigError("task suite: capability " + std::to_string(m) + " needs at least one task");
  if (dims < 1 || dims > 8) throw ConfigError("task suite: dims must be in [1, 8]");
  if (vocab_size < 2 || max_len < 1) throw ConfigError("task suite: bad vocab/len");
  if ((kind == SuiteKind::Interference || kind == SuiteKind::Mixed) && dims != 2)
    throw ConfigError("task suite: " + to_string(kind) + " requires dims = 2, got " +
                      std::to_string(dims));
  if (kind == SuiteKind::ScaleConflict && sizes.size() < 2)
    throw ConfigError("task suite: scale-conflict requires >= 2 capability labels");
  if (scale_factor <= 1.0 && kind == SuiteKind::ScaleConflict)
    throw ConfigError("task suite: scale-conflict requires scale_factor > 1");
  if (filler_token < 0 || filler_token >= vocab_size)
    throw ConfigError("task suite: filler token outside vocabulary");
}

namespace {

// dims 0,1 are the canonical accuracy/format pair; extra dims alternate the
// two kinds with rotated filler tokens.
std::vector<RewardRule> basic_rules(const SuiteConfig& cfg, double scale) {
  std::vector<RewardRule> rules(cfg.dims);
  for (int k = 0; k < cfg.dims; ++k) {
    RewardRule& r = rules[k];
    r.scale = scale;
    if (k % 2 == 0) {
      r.kind = RewardKind::Accuracy;
    } else {
      r.kind = RewardKind::Format;
      r.filler_token = (cfg.filler_token + k / 2) % cfg.vocab_size;
    }
  }
  return rules;
}

std::vector<RewardRule> interference_rules(const SuiteConfig& cfg) {
  RewardRule acc;
  acc.kind = RewardKind::Accuracy;
  RewardRule comp;
  comp.kind = RewardKind::Complement;
  comp.complement_c = cfg.complement_c;
  return {acc, comp};
}

}  // namespace

std::vector<Task> make_task_suite(const SuiteConfig& cfg) {
  cfg.validate();
  const int num_labels = static_cast<int>(cfg.sizes.size());
  std::vector<Task> tasks;
  int question_id = 0;
  for (int m = 0; m < num_labels; ++m) {
    // geometric magnitude ladder, 1 at label 0 up to scale_factor at the top
    const double ladder = num_labels > 1
                              ? std::pow(cfg.scale_factor, static_cast<double>(m) / (num_labels - 1))
                              : 1.0;
    for (int j = 0; j < cfg.sizes[m]; ++j) {
      Task task;
      task.question_id = question_id++;
      task.capability_uid = m;
      Rng rng(derive_seed(cfg.seed, 0x7461736bull, static_cast<uint64_t>(task.question_id)));
      task.target.resize(cfg.max_len);
      for (int t = 0; t < cfg.max_len; ++t)
        task.target[t] = static_cast<int>(rng.below(static_cast<uint64_t>(cfg.vocab_size)));

      switch (cfg.kind) {
        case SuiteKind::Basic:
          task.reward_spec = basic_rules(cfg, 1.0);
          break;
        case SuiteKind::Interference:
          task.reward_spec = interference_rules(cfg);
          break;
        case SuiteKind::ScaleConflict:
          task.reward_spec = basic_rules(cfg, ladder);
          break;
        case SuiteKind::Mixed:
          // even labels carry the interference pair, odd labels the scaled pair
          task.reward_spec = (m % 2 == 0) ? interference_rules(cfg)
                                          : basic_rules(cfg, cfg.scale_factor);
          break;
      }
      tasks.push_back(std::move(task));
    }
  }
  return tasks;
}

std::vector<double> evaluate_rewards(const Task& task, const TokenSequence& seq) {
  if (seq.size() != task.target.size())
    throw InvariantError("reward evaluation: sequence length " + std::to_string(seq.size()) +
                         " does not match task target length " + std::to_string(task.target.size()));
  const double len = static_cast<double>(seq.size());
  int matches = 0;
  for (size_t t = 0; t < seq.size(); ++t)
    if (seq[t] == task.target[t]) ++matches;
  const double accuracy_frac = matches / len;

  std::vector<double> rewards(task.reward_spec.size());
  for (size_t k = 0; k < task.reward_spec.size(); ++k) {
    const RewardRule& rule = task.reward_spec[k];
    switch (rule.kind) {
      case RewardKind::Accuracy:
        rewards[k] = rule.scale * accuracy_frac;
        break;
      case RewardKind::Format: {
        int fillers = 0;
        for (int tok : seq)
          if (tok == rule.filler_token) ++fillers;
        rewards[k] = rule.scale * (1.0 - fillers / len);
        break;
      }
      case RewardKind::Complement:
        rewards[k] = rule.scale * (rule.complement_c - accuracy_frac);
        break;
    }
  }
  return rewards;
}

std::string serialize_suite(const std::vector<Task>& tasks) {
  std::ostringstream out;
  out << "# prpolab task-suite v1\n";
  for (const Task& task : tasks) {
    out << task.question_id << ' ' << task.capability_uid << ' ';
    for (size_t t = 0; t < task.target.size(); ++t) {
      if (t) out << ',';
      out << task.target[t];
    }
    out << ' ' << task.reward_spec.size() << ' ';
    for (size_t k = 0; k < task.reward_spec.size(); ++k) {
      if (k) out << ';';
      out << task.reward_spec[k].to_string();
    }
    out << '\n';
  }
  return out.str();
}

std::vector<Task> parse_suite(const std::string& text) {
  std::vector<Task> tasks;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    Task task;
    std::string target_csv, rules_joined;
    size_t num_rules = 0;
    if (!(fields >> task.question_id >> task.capability_uid >> target_csv >> num_rules >>
          rules_joined))
      throw ConfigError("task suite line " + std::to_string(line_no) + ": malformed record");

    std::stringstream targets(target_csv);
    std::string tok;
    while (std::getline(targets, tok, ','))
      task.target.push_back(static_cast<int>(parse_double(tok, "target token")));
    if (task.target.empty())
      throw ConfigError("task suite line " + std::to_string(line_no) + ": empty target");

    std::stringstream rules(rules_joined);
    std::string rule_text;
    while (std::getline(rules, rule_text, ';'))
      task.reward_spec.push_back(RewardRule::parse(rule_text));
    if (task.reward_spec.size() != num_rules)
      throw ConfigError("task suite line " + std::to_string(line_no) + ": declared " +
                        std::to_string(num_rules) + " rules, found " +
                        std::to_string(task.reward_spec.size()));
    tasks.push_back(std::move(task));
  }
  if (!tasks.empty()) {
    const size_t dims = tasks.front().reward_spec.size();
    for (const Task& t : tasks)
      if (t.reward_spec.size() != dims)
        throw ConfigError("task suite: inconsistent reward dimension count across tasks");
  }
  return tasks;
}

uint64_t suite_hash(const std::vector<Task>& tasks) {
  const std::string text = serialize_suite(tasks);
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace prpolab
