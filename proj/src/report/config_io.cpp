#include "re2re/config_io.hpp"

#include <fstream>
#include <set>

#include "re2re/error.hpp"

namespace re2re {

using nlohmann::json;

namespace {

std::string join(const std::string& where, const std::string& key) { return where.empty() ? key : where + "." + key; }

// Reads fields out of one JSON object and rejects keys nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ValidationError(label() + ": expected a JSON object");
  }

  template <typename Fn>
  void field(const std::string& key, Fn&& fn) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      fn(j_.at(key), join(where_, key));
    } catch (const json::exception&) {
      throw ValidationError(join(where_, key) + ": wrong type");
    }
  }

  void number(const std::string& key, double& out) {
    field(key, [&](const json& v, const std::string& name) {
      if (!v.is_number()) throw ValidationError(name + ": expected a number");
      out = v.get<double>();
    });
  }

  template <typename U>
  void count(const std::string& key, U& out) {
    field(key, [&](const json& v, const std::string& name) {
      if (!v.is_number_unsigned()) throw ValidationError(name + ": expected a non-negative integer");
      out = static_cast<U>(v.get<std::uint64_t>());
    });
  }

  void boolean(const std::string& key, bool& out) {
    field(key, [&](const json& v, const std::string& name) {
      if (!v.is_boolean()) throw ValidationError(name + ": expected true or false");
      out = v.get<bool>();
    });
  }

  template <typename T, typename Parse>
  void name(const std::string& key, T& out, Parse&& parse) {
    field(key, [&](const json& v, const std::string& name) {
      if (!v.is_string()) throw ValidationError(name + ": expected a string");
      try {
        out = parse(v.get<std::string>());
      } catch (const ValidationError& e) {
        throw ValidationError(name + ": " + e.what());
      }
    });
  }

  void text(const std::string& key, std::string& out) {
    field(key, [&](const json& v, const std::string& name) {
      if (!v.is_string()) throw ValidationError(name + ": expected a string");
      out = v.get<std::string>();
    });
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.contains(key)) throw ValidationError(join(where_, key) + ": unknown key");
  }

  const std::string& where() const { return where_; }

 private:
  std::string label() const { return where_.empty() ? "config" : where_; }

  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

std::string_view cadence_name(WmaCadence c) { return c == WmaCadence::Epoch ? "epoch" : "step"; }

WmaCadence cadence_from_name(std::string_view s) {
  if (s == "epoch") return WmaCadence::Epoch;
  if (s == "step") return WmaCadence::Step;
  throw ValidationError("unknown WMA cadence '" + std::string(s) + "' (epoch|step)");
}

}  // namespace

json to_json(const SeparatorConfig& c) {
  return {{"num_filters", c.num_filters}, {"kernel_taps", c.kernel_taps}, {"hop", c.hop},
          {"num_blocks", c.num_blocks},   {"mask_mode", mask_mode_name(c.mask_mode)},
          {"sample_rate", c.sample_rate}};
}

json to_json(const LossConfig& c) {
  return {{"supervised_metric", metric_name(c.supervised_metric)},
          {"remixit_metric", metric_name(c.remixit_metric)},
          {"re2re_metric", metric_name(c.re2re_metric)},
          {"beta", c.beta},
          {"si_sdr_zero_mean", c.si_sdr.zero_mean}};
}

json to_json(const CorpusSpec& c) {
  return {{"domain", domain_name(c.domain)},
          {"num_train", c.num_train},
          {"num_eval", c.num_eval},
          {"chunk_seconds", c.chunk_seconds},
          {"sample_rate", c.sample_rate},
          {"speech_kind", c.speech_kind},
          {"noise_kind", noise_kind_name(c.noise_kind)},
          {"snr_mean_db", c.snr_mean_db},
          {"snr_std_db", c.snr_std_db},
          {"seed", c.seed}};
}

json to_json(const TrainConfig& c) {
  return {{"mode", mode_name(c.mode)},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"gamma", c.gamma},
          {"wma_every", c.wma_every},
          {"wma_cadence", cadence_name(c.wma_cadence)},
          {"lr", c.lr},
          {"adam", {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps}}},
          {"seed", c.seed},
          {"loss", to_json(c.loss)},
          {"strategy", strategy_name(c.strategy)},
          {"model", to_json(c.model)},
          {"oracle_teacher", c.oracle_teacher},
          {"fresh_optimizer", c.fresh_optimizer},
          {"loader_threads", c.loader_threads}};
}

SeparatorConfig separator_config_from_json(const json& j, const std::string& where) {
  SeparatorConfig c;
  ObjectReader r(j, where);
  r.count("num_filters", c.num_filters);
  r.count("kernel_taps", c.kernel_taps);
  r.count("hop", c.hop);
  r.count("num_blocks", c.num_blocks);
  r.name("mask_mode", c.mask_mode, mask_mode_from_name);
  r.number("sample_rate", c.sample_rate);
  r.finish();
  try {
    c.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(where + ": " + e.what());
  }
  return c;
}

LossConfig loss_config_from_json(const json& j, const std::string& where) {
  LossConfig c;
  ObjectReader r(j, where);
  r.name("supervised_metric", c.supervised_metric, metric_from_name);
  r.name("remixit_metric", c.remixit_metric, metric_from_name);
  r.name("re2re_metric", c.re2re_metric, metric_from_name);
  r.number("beta", c.beta);
  r.boolean("si_sdr_zero_mean", c.si_sdr.zero_mean);
  r.finish();
  if (!(c.beta >= 0.0)) throw ValidationError(join(where, "beta") + ": must be >= 0");
  c.validate();
  return c;
}

CorpusSpec corpus_spec_from_json(const json& j, const std::string& where) {
  CorpusSpec c;
  if (j.is_object() && j.contains("domain") && j.at("domain").is_string()) {
    try {
      c = CorpusSpec::defaults(domain_from_name(j.at("domain").get<std::string>()));
    } catch (const ValidationError& e) {
      throw ValidationError(join(where, "domain") + ": " + e.what());
    }
  }
  ObjectReader r(j, where);
  r.name("domain", c.domain, domain_from_name);
  r.count("num_train", c.num_train);
  r.count("num_eval", c.num_eval);
  r.number("chunk_seconds", c.chunk_seconds);
  r.number("sample_rate", c.sample_rate);
  r.text("speech_kind", c.speech_kind);
  r.name("noise_kind", c.noise_kind, noise_kind_from_name);
  r.number("snr_mean_db", c.snr_mean_db);
  r.number("snr_std_db", c.snr_std_db);
  r.count("seed", c.seed);
  r.finish();
  if (!(c.chunk_seconds > 0.0)) throw ValidationError(join(where, "chunk_seconds") + ": must be > 0");
  if (!(c.snr_std_db >= 0.0)) throw ValidationError(join(where, "snr_std_db") + ": must be >= 0");
  if (c.speech_kind != "harmonic-am")
    throw ValidationError(join(where, "speech_kind") + ": unknown speech kind '" + c.speech_kind + "' (harmonic-am)");
  c.validate();
  return c;
}

TrainConfig train_config_from_json(const json& j, const std::string& where) {
  TrainConfig c;
  ObjectReader r(j, where);
  r.name("mode", c.mode, mode_from_name);
  r.count("batch_size", c.batch_size);
  r.count("epochs", c.epochs);
  r.number("gamma", c.gamma);
  r.count("wma_every", c.wma_every);
  r.name("wma_cadence", c.wma_cadence, cadence_from_name);
  r.number("lr", c.lr);
  r.field("adam", [&](const json& v, const std::string& name) {
    ObjectReader a(v, name);
    a.number("beta1", c.adam.beta1);
    a.number("beta2", c.adam.beta2);
    a.number("eps", c.adam.eps);
    a.finish();
  });
  r.count("seed", c.seed);
  r.field("loss", [&](const json& v, const std::string& name) { c.loss = loss_config_from_json(v, name); });
  r.name("strategy", c.strategy, strategy_from_name);
  r.field("model", [&](const json& v, const std::string& name) { c.model = separator_config_from_json(v, name); });
  r.boolean("oracle_teacher", c.oracle_teacher);
  r.boolean("fresh_optimizer", c.fresh_optimizer);
  r.count("loader_threads", c.loader_threads);
  r.finish();
  if (!(c.gamma >= 0.0 && c.gamma <= 1.0)) throw ValidationError(join(where, "gamma") + ": must lie in [0, 1]");
  if (c.epochs < 1) throw ValidationError(join(where, "epochs") + ": must be at least 1");
  if (c.batch_size < 1) throw ValidationError(join(where, "batch_size") + ": must be at least 1");
  return c;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": malformed JSON: " + e.what());
  }
}

}  // namespace re2re
