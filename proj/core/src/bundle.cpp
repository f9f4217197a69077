#include "pcarect/bundle.hpp"

#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cstring>
#include <functional>
#include <map>

#include "pcarect/error.hpp"

namespace pcarect {
namespace {

constexpr std::array<char, 8> kMagic{'P', 'C', 'A', 'R', 'E', 'C', 'T', 'B'};
constexpr std::string_view kTextHeader = "# pcarect bundle";

// ---- binary encoding ----

class BinaryOut {
 public:
  void field(std::string_view) {}
  void newline() {}
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u64(s.size());
    buf_.insert(buf_.end(), s.begin(), s.end());
  }
  std::vector<std::uint8_t>& bytes() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class BinaryIn {
 public:
  BinaryIn(std::string tag, std::span<const std::uint8_t> bytes) : tag_(std::move(tag)), bytes_(bytes) {}

  void field(std::string_view) {}
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const auto n = u64();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  // Every item takes at least one 8-byte scalar.
  void expect_items(std::uint64_t n) const {
    if (n > (bytes_.size() - pos_) / 8) fail("truncated");
  }
  void finish() const {
    if (pos_ != bytes_.size()) fail("trailing bytes");
  }
  [[noreturn]] void fail(const std::string& what) const { throw Error("bundle section " + tag_ + ": " + what); }

 private:
  void need(std::uint64_t n) const {
    if (n > bytes_.size() - pos_) fail("truncated");
  }

  std::string tag_;
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

// ---- text encoding: "name = v v v" with whitespace-separated tokens ----

class TextOut {
 public:
  void field(std::string_view name) {
    if (!out_.empty()) out_ += '\n';
    out_ += name;
    out_ += " =";
  }
  void newline() { out_ += "\n "; }
  void u64(std::uint64_t v) { out_ += ' ' + std::to_string(v); }
  void i64(std::int64_t v) { out_ += ' ' + std::to_string(v); }
  void f64(double v) { out_ += ' ' + format_double(v); }
  void str(std::string_view s) {
    out_ += " \"";
    for (char c : s) {
      if (c == '"' || c == '\\') out_ += '\\';
      if (c == '\n') {
        out_ += "\\n";
        continue;
      }
      out_ += c;
    }
    out_ += '"';
  }
  std::string text() const { return out_ + '\n'; }

 private:
  std::string out_;
};

class TextIn {
 public:
  TextIn(std::string tag, std::string_view text) : tag_(std::move(tag)), text_(text) {}

  void field(std::string_view name) {
    const auto tok = token();
    if (tok != name) fail("expected '" + std::string(name) + "', found '" + std::string(tok) + "'");
    if (token() != "=") fail("expected '=' after " + std::string(name));
  }
  std::uint64_t u64() { return number<std::uint64_t>(); }
  std::int64_t i64() { return number<std::int64_t>(); }
  double f64() { return number<double>(); }
  std::string str() {
    skip_space();
    if (pos_ >= text_.size() || text_[pos_] != '"') fail("expected a quoted string");
    ++pos_;
    std::string s;
    while (pos_ < text_.size() && text_[pos_] != '"') {
      char c = text_[pos_++];
      if (c == '\\') {
        if (pos_ >= text_.size()) break;
        c = text_[pos_++];
        if (c == 'n') c = '\n';
      }
      s += c;
    }
    if (pos_ >= text_.size()) fail("unterminated string");
    ++pos_;
    return s;
  }
  void finish() {
    skip_space();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(token()) + "'");
  }
  void expect_items(std::uint64_t n) const {
    if (n > text_.size() - pos_) fail("truncated");
  }
  [[noreturn]] void fail(const std::string& what) const { throw Error("bundle section " + tag_ + ": " + what); }

 private:
  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  std::string_view token() {
    skip_space();
    const auto start = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    return text_.substr(start, pos_ - start);
  }
  template <typename T>
  T number() {
    const auto tok = token();
    T v{};
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) fail("bad number '" + std::string(tok) + "'");
    return v;
  }

  std::string tag_;
  std::string_view text_;
  std::size_t pos_ = 0;
};

// ---- section bodies, shared by both encodings ----

template <typename Out>
void put_vector(Out& out, std::string_view name, const Eigen::VectorXd& v) {
  out.field(name);
  out.u64(static_cast<std::uint64_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) out.f64(v(i));
}

template <typename In>
Eigen::VectorXd get_vector(In& in, std::string_view name) {
  in.field(name);
  const auto n = in.u64();
  if (n > (1u << 28)) in.fail("vector too large");
  in.expect_items(n);
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = in.f64();
  return v;
}

template <typename Out, typename M>
void put_matrix(Out& out, std::string_view name, const M& m) {
  out.field(name);
  out.u64(static_cast<std::uint64_t>(m.rows()));
  out.u64(static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out.newline();
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.f64(m(r, c));
  }
}

template <typename M, typename In>
M get_matrix(In& in, std::string_view name) {
  in.field(name);
  const auto rows = in.u64();
  const auto cols = in.u64();
  if (rows > (1u << 24) || cols > (1u << 24) || rows * cols > (1u << 28)) in.fail("matrix too large");
  in.expect_items(rows * cols);
  M m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = in.f64();
  }
  return m;
}

template <typename Out>
void put_transform(Out& out, const FeatureTransform& t) {
  out.field("space");
  out.str(to_string(t.space()));
  out.field("input_dim");
  out.u64(t.input_dim());
  if (const auto* pca = t.pca_model()) {
    put_vector(out, "mean", pca->mean);
    put_matrix(out, "components", pca->components);
    put_vector(out, "eigenvalues", pca->eigenvalues);
    out.field("energy_kept");
    out.f64(pca->energy_kept);
  } else if (const auto* vp = t.projection()) {
    out.field("kept_dims");
    out.u64(vp->kept_dims.size());
    for (int d : vp->kept_dims) out.i64(d);
  }
}

template <typename In>
FeatureTransform get_transform(In& in) {
  in.field("space");
  const std::string space = in.str();
  in.field("input_dim");
  const auto input_dim = static_cast<std::size_t>(in.u64());
  try {
    if (space == to_string(FeatureSpace::kRect)) return FeatureTransform::identity(input_dim);
    if (space == to_string(FeatureSpace::kPcaRect)) {
      PcaModel pca;
      pca.mean = get_vector(in, "mean");
      pca.components = get_matrix<FeatureMatrix>(in, "components");
      pca.eigenvalues = get_vector(in, "eigenvalues");
      in.field("energy_kept");
      pca.energy_kept = in.f64();
      if (pca.input_dim() != input_dim || static_cast<std::size_t>(pca.components.cols()) != input_dim ||
          static_cast<std::size_t>(pca.eigenvalues.size()) != pca.output_dim()) {
        in.fail("inconsistent PCA dimensions");
      }
      return FeatureTransform::pca(std::move(pca));
    }
    if (space == to_string(FeatureSpace::kVpcaRect)) {
      VirtualProjection vp;
      vp.input_dim = input_dim;
      in.field("kept_dims");
      const auto n = in.u64();
      if (n > input_dim) in.fail("more kept dimensions than inputs");
      in.expect_items(n);
      for (std::uint64_t i = 0; i < n; ++i) {
        const auto d = in.i64();
        if (d < 0 || static_cast<std::uint64_t>(d) >= input_dim) in.fail("kept dimension out of range");
        vp.kept_dims.push_back(static_cast<int>(d));
      }
      return FeatureTransform::virtual_projection(std::move(vp));
    }
  } catch (const ConfigError& e) {
    in.fail(e.what());
  }
  in.fail("unknown feature space '" + space + "'");
}

template <typename Out>
void put_tree(Out& out, const KdTree& tree) {
  out.field("dim");
  out.u64(tree.dim());
  out.field("points");
  out.u64(tree.point_count());
  out.field("nodes");
  out.u64(tree.nodes().size());
  for (const auto& n : tree.nodes()) {
    out.newline();
    out.u64(n.leaf ? 1 : 0);
    out.i64(n.split_dim);
    out.f64(n.split_val);
    out.i64(n.left);
    out.i64(n.right);
    out.i64(n.leaf_index);
  }
}

template <typename In>
KdTree get_tree(In& in) {
  in.field("dim");
  const auto dim = in.u64();
  in.field("points");
  const auto points = in.u64();
  in.field("nodes");
  const auto count = in.u64();
  if (count > (1u << 24)) in.fail("too many nodes");
  in.expect_items(count);
  std::vector<KdNode> nodes(count);
  for (auto& n : nodes) {
    n.leaf = in.u64() != 0;
    n.split_dim = static_cast<int>(in.i64());
    n.split_val = in.f64();
    n.left = static_cast<std::int32_t>(in.i64());
    n.right = static_cast<std::int32_t>(in.i64());
    n.leaf_index = static_cast<std::int32_t>(in.i64());
  }
  try {
    return KdTree(std::move(nodes), dim, points);
  } catch (const Error& e) {
    in.fail(e.what());
  }
}

template <typename Out>
void put_packed(Out& out, const PackedTree& p) {
  out.field("layout");
  out.str(to_string(p.layout));
  out.field("quantizer");
  out.f64(p.quantizer.lo);
  out.f64(p.quantizer.hi);
  out.field("dim");
  out.u64(p.dim);
  out.field("points");
  out.u64(p.point_count);
  out.field("words");
  out.u64(p.words.size());
  for (std::size_t i = 0; i < p.words.size(); ++i) {
    if (i % 8 == 0) out.newline();
    out.u64(p.words[i]);
  }
}

template <typename In>
PackedTree get_packed(In& in) {
  PackedTree p;
  in.field("layout");
  const std::string layout = in.str();
  if (layout == to_string(PackLayout::kStrict49)) p.layout = PackLayout::kStrict49;
  else if (layout == to_string(PackLayout::kWide64)) p.layout = PackLayout::kWide64;
  else in.fail("unknown layout '" + layout + "'");
  in.field("quantizer");
  p.quantizer.lo = in.f64();
  p.quantizer.hi = in.f64();
  in.field("dim");
  p.dim = in.u64();
  in.field("points");
  p.point_count = in.u64();
  in.field("words");
  const auto n = in.u64();
  if (n > (1u << 24)) in.fail("too many words");
  in.expect_items(n);
  p.words.resize(n);
  for (auto& w : p.words) w = in.u64();
  try {
    (void)unpack(p);  // validates every word
  } catch (const Error& e) {
    in.fail(e.what());
  }
  return p;
}

template <typename Out>
void put_svm(Out& out, const SvmModel& svm) {
  out.field("trained_on");
  out.str(svm.trained_on);
  out.field("classes");
  out.u64(svm.class_names.size());
  for (const auto& n : svm.class_names) out.str(n);
  put_matrix(out, "weights", svm.weights);
  put_vector(out, "bias", svm.bias);
}

template <typename In>
SvmModel get_svm(In& in) {
  SvmModel svm;
  in.field("trained_on");
  svm.trained_on = in.str();
  in.field("classes");
  const auto c = in.u64();
  if (c > (1u << 16)) in.fail("too many classes");
  for (std::uint64_t i = 0; i < c; ++i) svm.class_names.push_back(in.str());
  svm.weights = get_matrix<Eigen::MatrixXd>(in, "weights");
  svm.bias = get_vector(in, "bias");
  if (static_cast<std::uint64_t>(svm.weights.rows()) != c || static_cast<std::uint64_t>(svm.bias.size()) != c) {
    in.fail("class count disagrees with weights");
  }
  return svm;
}

template <typename Out>
void put_detectors(Out& out, const std::vector<DetectorModel>& detectors, std::size_t k) {
  out.field("dictionary_size");
  out.u64(k);
  out.field("detectors");
  out.u64(detectors.size());
  for (const auto& d : detectors) {
    out.newline();
    out.u64(d.landmarks.size());
    for (auto l : d.landmarks) out.i64(l);
  }
}

template <typename In>
std::vector<DetectorModel> get_detectors(In& in) {
  in.field("dictionary_size");
  const auto k = in.u64();
  if (k > (1u << 24)) in.fail("dictionary too large");
  in.field("detectors");
  const auto n = in.u64();
  if (n > (1u << 16)) in.fail("too many detectors");
  std::vector<DetectorModel> out;
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto m = in.u64();
    if (m > k) in.fail("more landmarks than dictionary entries");
    std::vector<std::int32_t> landmarks;
    for (std::uint64_t j = 0; j < m; ++j) landmarks.push_back(static_cast<std::int32_t>(in.i64()));
    try {
      out.push_back(DetectorModel::from_landmarks(std::move(landmarks), k));
    } catch (const Error& e) {
      in.fail(e.what());
    }
  }
  return out;
}

// Writes every section through `emit(tag, writer)`.
template <typename Out, typename Emit>
void write_sections(const Model& m, Emit&& emit) {
  {
    Out o;
    put_transform(o, m.dictionary.transform);
    emit("XFRM", o);
  }
  {
    Out o;
    put_matrix(o, "centroids", m.dictionary.centroids);
    emit("DICT", o);
  }
  {
    Out o;
    put_tree(o, m.tree);
    emit("TREE", o);
  }
  if (m.packed) {
    Out o;
    put_packed(o, *m.packed);
    emit("PACK", o);
  }
  {
    Out o;
    put_svm(o, m.svm);
    emit("SVM_", o);
  }
  {
    Out o;
    put_detectors(o, m.detectors, m.dictionary.size());
    emit("DETC", o);
  }
}

void check_model(const Model& m) {
  if (m.dictionary.transform.output_dim() != static_cast<std::size_t>(m.dictionary.centroids.cols())) {
    throw Error("bundle: dictionary width disagrees with the feature transform");
  }
  if (m.dictionary.transform.input_dim() != m.config.rect.dimension()) {
    throw Error("bundle: feature transform input disagrees with the RECT patch size");
  }
  if (m.tree.point_count() != m.dictionary.size() || m.tree.dim() != m.dictionary.transform.output_dim()) {
    throw Error("bundle: tree does not match the dictionary");
  }
  if (m.packed && (m.packed->point_count != m.tree.point_count() || m.packed->dim != m.tree.dim())) {
    throw Error("bundle: packed tree does not match the dictionary");
  }
  if (m.config.profile == Profile::kHardware && !m.packed) {
    throw Error("bundle: hardware profile needs a packed tree");
  }
  if (m.svm.dictionary_size() != m.dictionary.size()) throw Error("bundle: classifier width disagrees");
  if (!m.detectors.empty() && m.detectors.size() != m.svm.num_classes()) {
    throw Error("bundle: one detector per class expected");
  }
}

template <typename In, typename Payload>
Model assemble(std::map<std::string, Payload>& sections, const std::function<In(const std::string&)>& open,
               std::string config_text) {
  for (const char* tag : {"CONF", "XFRM", "DICT", "TREE", "SVM_", "DETC"}) {
    if (!sections.count(tag)) throw Error(std::string("bundle: missing section ") + tag);
  }
  Model m;
  try {
    m.config = PipelineConfig::parse(config_text);
    m.config.validate();
  } catch (const Error& e) {
    throw Error(std::string("bundle section CONF: ") + e.what());
  }
  {
    In in = open("XFRM");
    m.dictionary.transform = get_transform(in);
    in.finish();
  }
  {
    In in = open("DICT");
    m.dictionary.centroids = get_matrix<FeatureMatrix>(in, "centroids");
    in.finish();
  }
  {
    In in = open("TREE");
    m.tree = get_tree(in);
    in.finish();
  }
  if (sections.count("PACK")) {
    In in = open("PACK");
    m.packed = get_packed(in);
    in.finish();
  }
  {
    In in = open("SVM_");
    m.svm = get_svm(in);
    in.finish();
  }
  {
    In in = open("DETC");
    m.detectors = get_detectors(in);
    in.finish();
  }
  check_model(m);
  return m;
}

}  // namespace

std::vector<std::uint8_t> save_bundle(const Model& model) {
  check_model(model);
  std::vector<std::pair<std::string, std::vector<std::uint8_t>>> sections;
  const std::string conf = model.config.to_text();
  sections.emplace_back("CONF", std::vector<std::uint8_t>(conf.begin(), conf.end()));
  write_sections<BinaryOut>(model, [&](const char* tag, BinaryOut& o) { sections.emplace_back(tag, std::move(o.bytes())); });

  BinaryOut out;
  auto& bytes = out.bytes();
  bytes.insert(bytes.end(), kMagic.begin(), kMagic.end());
  auto put_u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  put_u32(kBundleVersion);
  put_u32(static_cast<std::uint32_t>(sections.size()));
  for (auto& [tag, payload] : sections) {
    bytes.insert(bytes.end(), tag.begin(), tag.end());
    out.u64(payload.size());
    bytes.insert(bytes.end(), payload.begin(), payload.end());
  }
  return std::move(bytes);
}

Model load_bundle(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw Error("bundle: bad magic (not a pcarect model)");
  }
  auto get_u32 = [&](std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[at + i]) << (8 * i);
    return v;
  };
  const auto version = get_u32(8);
  if (version == 0 || version > kBundleVersion) {
    throw Error("bundle: unsupported version " + std::to_string(version));
  }
  const auto count = get_u32(12);
  std::map<std::string, std::span<const std::uint8_t>> sections;
  std::size_t pos = 16;
  for (std::uint32_t s = 0; s < count; ++s) {
    if (bytes.size() - pos < 12) throw Error("bundle: truncated section header");
    std::string tag(reinterpret_cast<const char*>(bytes.data() + pos), 4);
    BinaryIn len_reader(tag, bytes.subspan(pos + 4, 8));
    const auto len = len_reader.u64();
    pos += 12;
    if (len > bytes.size() - pos) throw Error("bundle: section " + tag + " truncated");
    if (!sections.emplace(tag, bytes.subspan(pos, len)).second) throw Error("bundle: duplicate section " + tag);
    pos += len;
  }
  if (pos != bytes.size()) throw Error("bundle: trailing bytes after the last section");
  if (!sections.count("CONF")) throw Error("bundle: missing section CONF");
  const auto conf = sections.at("CONF");
  std::string config_text(reinterpret_cast<const char*>(conf.data()), conf.size());
  return assemble<BinaryIn>(
      sections, [&](const std::string& tag) { return BinaryIn(tag, sections.at(tag)); }, std::move(config_text));
}

std::string export_text_bundle(const Model& model) {
  check_model(model);
  std::string out(kTextHeader);
  out += " v" + std::to_string(kBundleVersion) + "\n[CONF]\n" + model.config.to_text();
  write_sections<TextOut>(model, [&](const char* tag, TextOut& o) {
    out += std::string("[") + tag + "]\n" + o.text();
  });
  return out;
}

Model import_text_bundle(std::string_view text) {
  auto nl = text.find('\n');
  const std::string_view first = text.substr(0, nl);
  if (first.substr(0, kTextHeader.size()) != kTextHeader) throw Error("bundle: not a text bundle");
  const std::string_view ver = first.substr(kTextHeader.size());
  if (ver != " v" + std::to_string(kBundleVersion)) throw Error("bundle: unsupported text version '" + std::string(ver) + "'");
  text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);

  std::map<std::string, std::string_view> sections;
  std::string current;
  std::size_t body_start = 0;
  std::size_t pos = 0;
  auto close = [&](std::size_t end) {
    if (!current.empty() && !sections.emplace(current, text.substr(body_start, end - body_start)).second) {
      throw Error("bundle: duplicate section " + current);
    }
  };
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const auto line = text.substr(pos, eol - pos);
    if (line.size() == 6 && line.front() == '[' && line.back() == ']') {
      close(pos);
      current = std::string(line.substr(1, 4));
      body_start = std::min(eol + 1, text.size());
    } else if (current.empty() && !line.empty()) {
      throw Error("bundle: content before the first section");
    }
    pos = eol + 1;
  }
  close(text.size());
  if (!sections.count("CONF")) throw Error("bundle: missing section CONF");
  return assemble<TextIn>(
      sections, [&](const std::string& tag) { return TextIn(tag, sections.at(tag)); },
      std::string(sections.at("CONF")));
}

void save_bundle_file(const std::filesystem::path& path, const Model& model) {
  const auto bytes = save_bundle(model);
  write_text_file(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

Model load_bundle_file(const std::filesystem::path& path) {
  const auto bytes = read_binary_file(path);
  const std::string_view head(reinterpret_cast<const char*>(bytes.data()), std::min(bytes.size(), kTextHeader.size()));
  try {
    if (head == kTextHeader) {
      return import_text_bundle(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    }
    return load_bundle(bytes);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

}  // namespace pcarect
