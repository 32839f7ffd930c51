#include "phonation/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "phonation/errors.hpp"
#include "phonation/run_config.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are written as raw little-endian doubles");

namespace phonation {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'P', 'H', 'O', 'N', 'C', 'K', 'P', 'T'};

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw CorruptFileError("checkpoint: truncated file");
  return v;
}

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw CorruptFileError("checkpoint: truncated file");
  return v;
}

std::string train_json(const TrainConfig& c) {
  return json{{"batch_size", c.batch_size},
              {"base_lr", c.base_lr},
              {"anneal_factor", c.anneal_factor},
              {"anneal_period", c.anneal_period},
              {"weight_decay", c.weight_decay},
              {"epochs", c.epochs},
              {"seed", c.seed},
              {"f_average", c.f_average == FAverage::Macro ? "macro" : "weighted"}}
      .dump();
}

TrainConfig train_from(const json& j) {
  TrainConfig c;
  c.batch_size = j.at("batch_size").get<int>();
  c.base_lr = j.at("base_lr").get<double>();
  c.anneal_factor = j.at("anneal_factor").get<double>();
  c.anneal_period = j.at("anneal_period").get<int>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.f_average = j.at("f_average").get<std::string>() == "weighted" ? FAverage::Weighted
                                                                   : FAverage::Macro;
  return c;
}

}  // namespace

CheckpointRecord make_checkpoint(PhonationNet& model, const AdamState& adam,
                                 const TrainConfig& train, int epoch,
                                 const std::string& rng_state) {
  CheckpointRecord rec;
  rec.config = model.config();
  rec.train = train;
  rec.epoch = epoch;
  rec.adam_step_count = adam.step_count;
  rec.rng_state = rng_state;

  const auto named = model.named_parameters();
  for (const auto& [name, tensor] : named) {
    rec.tensors.push_back(TensorEntry{name, tensor.shape(), tensor.data()});
  }
  if (!adam.first_moment.empty()) {
    if (adam.first_moment.size() != named.size()) {
      throw ShapeError("checkpoint: optimizer tracks a different parameter list");
    }
    for (std::size_t i = 0; i < named.size(); ++i) {
      rec.tensors.push_back(TensorEntry{"adam.m." + named[i].first, named[i].second.shape(),
                                        adam.first_moment[i]});
      rec.tensors.push_back(TensorEntry{"adam.v." + named[i].first, named[i].second.shape(),
                                        adam.second_moment[i]});
    }
  }
  return rec;
}

void save_checkpoint(const std::string& path, const CheckpointRecord& record) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);

  out.write(kMagic, sizeof kMagic);
  write_u32(out, record.format_version);

  json header{{"format_version", record.format_version},
              {"network", json::parse(network_config_to_json(record.config))},
              {"train", json::parse(train_json(record.train))},
              {"epoch", record.epoch},
              {"adam_step_count", record.adam_step_count},
              {"rng_state", record.rng_state}};
  const std::string head = header.dump();
  write_u64(out, head.size());
  out.write(head.data(), static_cast<std::streamsize>(head.size()));

  write_u32(out, static_cast<std::uint32_t>(record.tensors.size()));
  for (const auto& entry : record.tensors) {
    write_u32(out, static_cast<std::uint32_t>(entry.name.size()));
    out.write(entry.name.data(), static_cast<std::streamsize>(entry.name.size()));
    write_u32(out, static_cast<std::uint32_t>(entry.shape.size()));
    for (int d : entry.shape) write_u32(out, static_cast<std::uint32_t>(d));
    write_u64(out, entry.data.size());
    out.write(reinterpret_cast<const char*>(entry.data.data()),
              static_cast<std::streamsize>(entry.data.size() * sizeof(double)));
  }
  if (!out) throw IoError("short write to " + path);
}

CheckpointRecord load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);

  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw CorruptFileError("checkpoint: bad magic");
  }
  CheckpointRecord rec;
  rec.format_version = read_u32(in);
  if (rec.format_version != kCheckpointVersion) {
    throw VersionMismatchError("checkpoint: format version " +
                               std::to_string(rec.format_version) + ", expected " +
                               std::to_string(kCheckpointVersion));
  }

  const std::uint64_t head_len = read_u64(in);
  std::string head(head_len, '\0');
  in.read(head.data(), static_cast<std::streamsize>(head_len));
  if (!in) throw CorruptFileError("checkpoint: truncated header");
  try {
    const json header = json::parse(head);
    rec.config = network_config_from_json(header.at("network").dump());
    rec.train = train_from(header.at("train"));
    rec.epoch = header.at("epoch").get<int>();
    rec.adam_step_count = header.at("adam_step_count").get<std::int64_t>();
    rec.rng_state = header.at("rng_state").get<std::string>();
  } catch (const json::exception& e) {
    throw CorruptFileError(std::string("checkpoint: bad header json: ") + e.what());
  }

  const std::uint32_t n_tensors = read_u32(in);
  rec.tensors.resize(n_tensors);
  for (auto& entry : rec.tensors) {
    const std::uint32_t name_len = read_u32(in);
    entry.name.resize(name_len);
    in.read(entry.name.data(), name_len);
    const std::uint32_t ndim = read_u32(in);
    entry.shape.resize(ndim);
    for (auto& d : entry.shape) d = static_cast<int>(read_u32(in));
    const std::uint64_t count = read_u64(in);
    if (count != static_cast<std::uint64_t>(shape_numel(entry.shape))) {
      throw CorruptFileError("checkpoint: tensor size disagrees with its shape");
    }
    entry.data.resize(count);
    in.read(reinterpret_cast<char*>(entry.data.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw CorruptFileError("checkpoint: truncated tensor payload");
  }
  return rec;
}

PhonationNet restore_network(const CheckpointRecord& record, AdamState* adam_out) {
  PhonationNet net(record.config);
  auto named = net.named_parameters();

  auto find = [&](const std::string& name) -> const TensorEntry* {
    for (const auto& e : record.tensors) {
      if (e.name == name) return &e;
    }
    return nullptr;
  };

  for (auto& [name, tensor] : named) {
    const TensorEntry* entry = find(name);
    if (!entry) throw ConfigError("checkpoint: missing tensor '" + name + "'");
    if (entry->shape != tensor.shape()) {
      throw ShapeError("checkpoint: tensor '" + name + "' has shape " +
                       shape_to_string(entry->shape) + ", config wants " +
                       shape_to_string(tensor.shape()));
    }
    tensor.data() = entry->data;
  }

  if (adam_out) {
    AdamState adam;
    adam.weight_decay = record.train.weight_decay;
    adam.step_count = record.adam_step_count;
    if (find("adam.m." + named[0].first)) {
      adam.first_moment.resize(named.size());
      adam.second_moment.resize(named.size());
      for (std::size_t i = 0; i < named.size(); ++i) {
        const TensorEntry* m = find("adam.m." + named[i].first);
        const TensorEntry* v = find("adam.v." + named[i].first);
        if (!m || !v) throw ConfigError("checkpoint: incomplete optimizer state");
        adam.first_moment[i] = m->data;
        adam.second_moment[i] = v->data;
      }
    }
    *adam_out = std::move(adam);
  }
  return net;
}

}  // namespace phonation
