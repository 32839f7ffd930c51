#include "phonation/run_config.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "phonation/errors.hpp"

namespace phonation {

using nlohmann::json;

namespace {

json filter_to_json(const FilterShape& f) { return json{{"freq", f.freq}, {"time", f.time}}; }

FilterShape filter_from_json(const json& j) {
  return FilterShape{j.at("freq").get<int>(), j.at("time").get<int>()};
}

json pool_to_json(const PoolSpec& p) {
  return json{{"window_f", p.window_f},
              {"window_t", p.window_t},
              {"stride_f", p.stride_f},
              {"stride_t", p.stride_t}};
}

PoolSpec pool_from_json(const json& j) {
  PoolSpec p;
  p.window_f = j.at("window_f").get<int>();
  p.window_t = j.at("window_t").get<int>();
  p.stride_f = j.at("stride_f").get<int>();
  p.stride_t = j.at("stride_t").get<int>();
  return p;
}

json network_to_json_obj(const NetworkConfig& c) {
  json convs = json::array();
  for (const auto& l : c.conv) {
    convs.push_back(json{{"filter", filter_to_json(l.filter)},
                         {"out_channels", l.out_channels},
                         {"pad_f", l.pad_f},
                         {"pad_t", l.pad_t}});
  }
  return json{{"input_bands", c.input_bands},
              {"input_frames", c.input_frames},
              {"conv", convs},
              {"pool", json::array({pool_to_json(c.pool[0]), pool_to_json(c.pool[1])})},
              {"mask",
               json{{"pool", pool_to_json(c.mask.pool)},
                    {"filter", filter_to_json(c.mask.filter)},
                    {"channels", c.mask.channels}}},
              {"shared_mask", c.shared_mask},
              {"dense_hidden", c.dense_hidden},
              {"n_classes", c.n_classes},
              {"init_seed", c.init_seed}};
}

NetworkConfig network_from_json_obj(const json& j) {
  NetworkConfig c;
  c.input_bands = j.at("input_bands").get<int>();
  c.input_frames = j.at("input_frames").get<int>();
  const auto& convs = j.at("conv");
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& l = convs.at(i);
    c.conv[i].filter = filter_from_json(l.at("filter"));
    c.conv[i].out_channels = l.at("out_channels").get<int>();
    c.conv[i].pad_f = l.at("pad_f").get<int>();
    c.conv[i].pad_t = l.at("pad_t").get<int>();
  }
  c.pool[0] = pool_from_json(j.at("pool").at(0));
  c.pool[1] = pool_from_json(j.at("pool").at(1));
  c.mask.pool = pool_from_json(j.at("mask").at("pool"));
  c.mask.filter = filter_from_json(j.at("mask").at("filter"));
  c.mask.channels = j.at("mask").at("channels").get<int>();
  c.shared_mask = j.at("shared_mask").get<bool>();
  c.dense_hidden = j.at("dense_hidden").get<int>();
  c.n_classes = j.at("n_classes").get<int>();
  c.init_seed = j.at("init_seed").get<std::uint64_t>();
  return c;
}

json timbre_to_json(const ModeTimbre& t) {
  return json{{"harmonics", t.harmonics},
              {"noise_ratio", t.noise_ratio},
              {"tilt_db_per_octave", t.tilt_db_per_octave},
              {"am_depth", t.am_depth},
              {"am_rate_hz", t.am_rate_hz}};
}

ModeTimbre timbre_from_json(const json& j) {
  ModeTimbre t;
  t.harmonics = j.at("harmonics").get<int>();
  t.noise_ratio = j.at("noise_ratio").get<double>();
  t.tilt_db_per_octave = j.at("tilt_db_per_octave").get<double>();
  t.am_depth = j.at("am_depth").get<double>();
  t.am_rate_hz = j.at("am_rate_hz").get<double>();
  return t;
}

json train_to_json(const TrainConfig& c) {
  return json{{"batch_size", c.batch_size},
              {"base_lr", c.base_lr},
              {"anneal_factor", c.anneal_factor},
              {"anneal_period", c.anneal_period},
              {"weight_decay", c.weight_decay},
              {"epochs", c.epochs},
              {"seed", c.seed},
              {"f_average", c.f_average == FAverage::Macro ? "macro" : "weighted"}};
}

TrainConfig train_from_json(const json& j) {
  TrainConfig c;
  c.batch_size = j.at("batch_size").get<int>();
  c.base_lr = j.at("base_lr").get<double>();
  c.anneal_factor = j.at("anneal_factor").get<double>();
  c.anneal_period = j.at("anneal_period").get<int>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  const std::string avg = j.at("f_average").get<std::string>();
  if (avg == "macro") {
    c.f_average = FAverage::Macro;
  } else if (avg == "weighted") {
    c.f_average = FAverage::Weighted;
  } else {
    throw ConfigError("f_average must be 'macro' or 'weighted'");
  }
  return c;
}

}  // namespace

std::string network_config_to_json(const NetworkConfig& config) {
  return network_to_json_obj(config).dump();
}

NetworkConfig network_config_from_json(const std::string& text) {
  try {
    return network_from_json_obj(json::parse(text));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("network config json: ") + e.what());
  }
}

std::string run_config_to_json(const RunConfig& c) {
  json j{{"seed", c.seed},
         {"audio",
          json{{"target_rate", c.target_rate},
               {"trim_threshold_db", c.trim_threshold_db},
               {"window_size", c.stft.window_size},
               {"overlap_fraction", c.stft.overlap_fraction},
               {"window_function", c.stft.window_function},
               {"mel_bands", c.mel_bands},
               {"f_min", c.f_min},
               {"f_max", c.f_max},
               {"log_compress", c.log_compress}}},
         {"segmentation",
          json{{"window_ms", c.segmentation.window_ms},
               {"overlap_ms", c.segmentation.overlap_ms},
               {"trim_ms", c.segmentation.trim_ms}}},
         {"synth",
          json{{"modes", json::array({timbre_to_json(c.synth.modes[0]),
                                      timbre_to_json(c.synth.modes[1]),
                                      timbre_to_json(c.synth.modes[2]),
                                      timbre_to_json(c.synth.modes[3])})},
               {"f0_min_hz", c.synth.f0_min_hz},
               {"f0_max_hz", c.synth.f0_max_hz},
               {"duration_min_s", c.synth.duration_min_s},
               {"duration_max_s", c.synth.duration_max_s},
               {"sample_rate", c.synth.sample_rate},
               {"seed", c.synth.seed}}},
         {"network", network_to_json_obj(c.network)},
         {"train", train_to_json(c.train)},
         {"folds", c.folds},
         {"parallel_folds", c.parallel_folds},
         {"test_split", c.test_split}};
  return j.dump(2) + "\n";
}

RunConfig run_config_from_json(const std::string& text) {
  RunConfig c;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("run config json: ") + e.what());
  }
  try {
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("audio")) {
      const auto& a = j.at("audio");
      if (a.contains("target_rate")) c.target_rate = a.at("target_rate").get<int>();
      if (a.contains("trim_threshold_db")) c.trim_threshold_db = a.at("trim_threshold_db").get<double>();
      if (a.contains("window_size")) c.stft.window_size = a.at("window_size").get<int>();
      if (a.contains("overlap_fraction")) c.stft.overlap_fraction = a.at("overlap_fraction").get<double>();
      if (a.contains("window_function")) c.stft.window_function = a.at("window_function").get<std::string>();
      if (a.contains("mel_bands")) c.mel_bands = a.at("mel_bands").get<int>();
      if (a.contains("f_min")) c.f_min = a.at("f_min").get<double>();
      if (a.contains("f_max")) c.f_max = a.at("f_max").get<double>();
      if (a.contains("log_compress")) c.log_compress = a.at("log_compress").get<bool>();
    }
    if (j.contains("segmentation")) {
      const auto& s = j.at("segmentation");
      if (s.contains("window_ms")) c.segmentation.window_ms = s.at("window_ms").get<double>();
      if (s.contains("overlap_ms")) c.segmentation.overlap_ms = s.at("overlap_ms").get<double>();
      if (s.contains("trim_ms")) c.segmentation.trim_ms = s.at("trim_ms").get<double>();
    }
    if (j.contains("synth")) {
      const auto& s = j.at("synth");
      if (s.contains("modes")) {
        for (std::size_t i = 0; i < 4; ++i) c.synth.modes[i] = timbre_from_json(s.at("modes").at(i));
      }
      if (s.contains("f0_min_hz")) c.synth.f0_min_hz = s.at("f0_min_hz").get<double>();
      if (s.contains("f0_max_hz")) c.synth.f0_max_hz = s.at("f0_max_hz").get<double>();
      if (s.contains("duration_min_s")) c.synth.duration_min_s = s.at("duration_min_s").get<double>();
      if (s.contains("duration_max_s")) c.synth.duration_max_s = s.at("duration_max_s").get<double>();
      if (s.contains("sample_rate")) c.synth.sample_rate = s.at("sample_rate").get<int>();
      if (s.contains("seed")) c.synth.seed = s.at("seed").get<std::uint64_t>();
    }
    if (j.contains("network")) c.network = network_from_json_obj(j.at("network"));
    if (j.contains("train")) c.train = train_from_json(j.at("train"));
    if (j.contains("folds")) c.folds = j.at("folds").get<int>();
    if (j.contains("parallel_folds")) c.parallel_folds = j.at("parallel_folds").get<int>();
    if (j.contains("test_split")) c.test_split = j.at("test_split").get<double>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("run config json: ") + e.what());
  }
  return c;
}

void save_run_config(const std::string& path, const RunConfig& config) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << run_config_to_json(config);
  if (!out) throw IoError("short write to " + path);
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return run_config_from_json(buf.str());
}

}  // namespace phonation
