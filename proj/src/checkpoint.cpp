// Text checkpoint, one record per line:
//
//   budgetcl-checkpoint 1
//   head <linear|cosine> scale <eta> pretrain_classes <k> scope <full|head_only> seed <s>
//   layers <L>
//   layer <rows> <cols>        followed by a "w" line (row-major) and a "b" line
//   head_weights <rows> <cols> followed by a "w" line (row-major)
//   head_bias <n>              followed by a "b" line (linear head only)
//
// Reals use the shortest representation that round-trips exactly.

#include "budgetcl/model.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace budgetcl {

namespace {

void write_values(std::ostream& out, const char* tag, const double* data, Eigen::Index n) {
  out << tag;
  char buf[32];
  for (Eigen::Index i = 0; i < n; ++i) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), data[i]);
    out << ' ';
    out.write(buf, ptr - buf);
  }
  out << '\n';
}

void read_values(std::istream& in, const char* tag, double* data, Eigen::Index n) {
  std::string word;
  if (!(in >> word) || word != tag) throw DataError(std::string("checkpoint: expected '") + tag + "'");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(in >> word)) throw DataError("checkpoint: truncated values");
    auto [ptr, ec] = std::from_chars(word.data(), word.data() + word.size(), data[i]);
    if (ec != std::errc() || ptr != word.data() + word.size()) throw DataError("checkpoint: bad number " + word);
  }
}

void expect(std::istream& in, const std::string& word) {
  std::string got;
  if (!(in >> got) || got != word) throw DataError("checkpoint: expected '" + word + "', got '" + got + "'");
}

}  // namespace

void save_checkpoint(const MlpModel& model, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "budgetcl-checkpoint " << kCheckpointVersion << '\n';
  char scale[32];
  auto [end, ec] = std::to_chars(scale, scale + sizeof(scale), model.cosine_scale());
  out << "head " << to_string(model.head_kind()) << " scale " << std::string(scale, end) << " pretrain_classes "
      << model.pretrain_classes() << " scope " << to_string(model.scope()) << " seed " << model.seed() << '\n';
  out << "layers " << model.backbone().size() << '\n';
  for (const auto& layer : model.backbone()) {
    out << "layer " << layer.weights.rows() << ' ' << layer.weights.cols() << '\n';
    write_values(out, "w", layer.weights.data(), layer.weights.size());
    write_values(out, "b", layer.bias.data(), layer.bias.size());
  }
  const Matrix& w = model.head_weights();
  out << "head_weights " << w.rows() << ' ' << w.cols() << '\n';
  write_values(out, "w", w.data(), w.size());
  if (model.head_kind() == HeadKind::linear) {
    out << "head_bias " << model.head_bias().size() << '\n';
    write_values(out, "b", model.head_bias().data(), model.head_bias().size());
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write checkpoint '" + path.string() + "'");
  f << out.str();
}

MlpModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
  expect(in, "budgetcl-checkpoint");
  int version = 0;
  if (!(in >> version) || version != kCheckpointVersion) {
    throw DataError("checkpoint: unsupported version " + std::to_string(version));
  }
  std::string head_kind, scope, scale_text;
  int pretrain_classes = 0;
  std::uint64_t seed = 0;
  expect(in, "head");
  in >> head_kind;
  expect(in, "scale");
  in >> scale_text;
  expect(in, "pretrain_classes");
  in >> pretrain_classes;
  expect(in, "scope");
  in >> scope;
  expect(in, "seed");
  in >> seed;
  double scale = 0.0;
  std::from_chars(scale_text.data(), scale_text.data() + scale_text.size(), scale);

  std::size_t num_layers = 0;
  expect(in, "layers");
  in >> num_layers;
  std::vector<DenseLayer> layers(num_layers);
  for (auto& layer : layers) {
    Eigen::Index rows = 0, cols = 0;
    expect(in, "layer");
    in >> rows >> cols;
    if (!in || rows < 0 || cols < 0) throw DataError("checkpoint: bad layer shape");
    layer.weights.resize(rows, cols);
    layer.bias.resize(rows);
    read_values(in, "w", layer.weights.data(), layer.weights.size());
    read_values(in, "b", layer.bias.data(), layer.bias.size());
  }
  Eigen::Index rows = 0, cols = 0;
  expect(in, "head_weights");
  in >> rows >> cols;
  if (!in || rows < 0 || cols < 0) throw DataError("checkpoint: bad head shape");
  Matrix head(rows, cols);
  read_values(in, "w", head.data(), head.size());
  Vector bias;
  const HeadKind kind = parse_head_kind(head_kind);
  if (kind == HeadKind::linear) {
    Eigen::Index n = 0;
    expect(in, "head_bias");
    in >> n;
    bias.resize(n);
    read_values(in, "b", bias.data(), n);
  }
  return MlpModel(std::move(layers), std::move(head), std::move(bias), kind, scale, pretrain_classes,
                  parse_scope(scope), seed);
}

}  // namespace budgetcl
