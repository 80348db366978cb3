#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "fab/config/compile.hpp"
#include "fab/config/profile.hpp"
#include "fab/node/state.hpp"
#include "fab/pkg/package.hpp"
#include "fab/pkg/reconcile.hpp"
#include "fab/secure/provider.hpp"
#include "fab/util.hpp"

namespace fab::node {

enum class BootMethod { Floppy, Kernel, Pxe };

// Everything the base installer needs to lay a machine down. Derived from
// the profile: the node itself carries no configuration of its own.
struct InstallSpec {
  struct Partition {
    std::string mount;
    std::int64_t size_gb = 0;
    bool preserve = false;
  };

  std::vector<Partition> partition_table;
  pkg::DesiredList base_packages;
  BootMethod boot_method = BootMethod::Pxe;

  void validate() const {
    int roots = 0;
    for (const Partition& p : partition_table) {
      if (p.mount == "/") {
        ++roots;
        if (p.preserve) {
          throw Error("BAD_INSTALL_SPEC", "the root mount cannot be preserved");
        }
      }
    }
    if (roots != 1) {
      throw Error("BAD_INSTALL_SPEC", "exactly one root mount required");
    }
    base_packages.validate();
  }
};

struct DiskState {
  std::string data_digest;  // digest of whatever data lives on the mount
  bool preserve = false;

  bool operator==(const DiskState& other) const = default;
};

// A simulated machine. Everything that defines its configured state is
// reproducible from the outside; the rest (boot counter, error log, key
// material) is operational residue.
struct VirtualNode {
  std::string name;
  NodeState state;
  pkg::InstalledSet installed;
  std::map<std::string, DiskState> disks;
  std::int64_t applied_profile_generation = 0;
  std::string applied_profile_digest;
  std::map<std::string, std::int64_t> config_marks;
  std::map<std::string, std::string> secrets;   // label -> decrypted payload
  std::map<std::string, std::string> settings;  // component-rendered config
  std::vector<std::string> error_log;
  std::int64_t install_epoch = 0;

  Phase phase() const { return state.phase; }

  void write_data(const std::string& mount, std::string_view content) {
    auto it = disks.find(mount);
    if (it == disks.end()) {
      throw Error("UNKNOWN_MOUNT", "node " + name + " has no mount " + mount);
    }
    it->second.data_digest = util::to_hex(util::fnv1a64(content));
  }

  void record_error(std::string msg) { error_log.push_back(std::move(msg)); }
};

// A configuration component: observes the profile and the node, writes
// settings derived from nothing else, so rerunning it is harmless.
struct Component {
  std::string name;
  std::function<void(const config::ProfileTree&, VirtualNode&)> apply;
};

class ComponentRegistry {
 public:
  void add(std::string name,
           std::function<void(const config::ProfileTree&, VirtualNode&)> fn) {
    components_.push_back({std::move(name), std::move(fn)});
  }

  const std::vector<Component>& all() const { return components_; }

 private:
  std::vector<Component> components_;
};

// The services a node reaches over the network during install and
// reconfiguration. The fleet simulator backs this with the replicated
// server cluster; tests use stubs.
class NodeServices {
 public:
  virtual ~NodeServices() = default;

  virtual config::ProfileTree fetch_profile(const std::string& node) = 0;
  virtual secure::KeyHandle fetch_private_key(const std::string& node) = 0;
  virtual std::vector<secure::EncryptedSecret> fetch_secrets(
      const std::string& node) = 0;
  virtual std::string decrypt(const secure::KeyHandle& key,
                              const secure::EncryptedSecret& blob) = 0;
  // Pulls a package payload from the repository; throws if unavailable.
  virtual void fetch_package(const pkg::PackageSpec& spec) = 0;
};

// ---- profile conventions -------------------------------------------------

// /software/packages is a list of {name, version, release, arch} records.
inline pkg::DesiredList desired_from_profile(const config::ProfileTree& p) {
  pkg::DesiredList out;
  out.source_generation = p.generation;
  const config::ConfigValue* v = config::query(p, "/software/packages");
  if (v == nullptr) return out;
  if (v->kind() != config::ConfigValue::Kind::List) {
    throw Error("BAD_DESIRED", "/software/packages must be a list");
  }
  for (const config::ConfigValue& item : v->as_list()) {
    if (item.kind() != config::ConfigValue::Kind::Record) {
      throw Error("BAD_DESIRED", "package entries must be records");
    }
    const auto& rec = item.as_record();
    auto field = [&](const char* key) -> std::string {
      auto it = rec.find(key);
      if (it == rec.end()) {
        throw Error("BAD_DESIRED",
                    std::string("package entry missing '") + key + "'");
      }
      return it->second.as_string();
    };
    out.packages.push_back(
        {field("name"), field("version"), field("release"), field("arch")});
  }
  out.validate();
  return out;
}

// /hardware/partitions is a list of {mount, size_gb, preserve} records;
// /install/boot_method one of floppy|kernel|pxe.
inline InstallSpec install_spec_from_profile(const config::ProfileTree& p) {
  InstallSpec spec;
  const config::ConfigValue* parts = config::query(p, "/hardware/partitions");
  if (parts == nullptr) {
    spec.partition_table.push_back({"/", 40, false});
  } else {
    if (parts->kind() != config::ConfigValue::Kind::List) {
      throw Error("BAD_INSTALL_SPEC", "/hardware/partitions must be a list");
    }
    for (const config::ConfigValue& item : parts->as_list()) {
      const auto& rec = item.as_record();
      InstallSpec::Partition part;
      auto mount = rec.find("mount");
      if (mount == rec.end()) {
        throw Error("BAD_INSTALL_SPEC", "partition entry missing 'mount'");
      }
      part.mount = mount->second.as_string();
      if (auto it = rec.find("size_gb"); it != rec.end()) {
        part.size_gb = it->second.as_integer();
      }
      if (auto it = rec.find("preserve"); it != rec.end()) {
        part.preserve = it->second.as_boolean();
      }
      spec.partition_table.push_back(std::move(part));
    }
  }
  if (const config::ConfigValue* boot = config::query(p, "/install/boot_method")) {
    const std::string& b = boot->as_string();
    if (b == "floppy") {
      spec.boot_method = BootMethod::Floppy;
    } else if (b == "kernel") {
      spec.boot_method = BootMethod::Kernel;
    } else if (b == "pxe") {
      spec.boot_method = BootMethod::Pxe;
    } else {
      throw Error("BAD_INSTALL_SPEC", "unknown boot method '" + b + "'");
    }
  }
  spec.base_packages = desired_from_profile(p);
  spec.validate();
  return spec;
}

// ---- agent operations ------------------------------------------------------

// Base install: wipe (except preserved data disks), lay down the base
// package set, arm the run-once first-boot hook. Keys are fetched here,
// in the earliest phase, while the server-side window is open.
inline void begin_install(VirtualNode& node, const InstallSpec& spec,
                          NodeServices* services = nullptr) {
  spec.validate();
  node.state.transition(Phase::BaseInstalling);
  node.install_epoch += 1;

  std::map<std::string, DiskState> disks;
  for (const InstallSpec::Partition& part : spec.partition_table) {
    DiskState d;
    d.preserve = part.preserve;
    if (part.preserve) {
      auto it = node.disks.find(part.mount);
      if (it != node.disks.end()) d.data_digest = it->second.data_digest;
    }
    disks[part.mount] = std::move(d);
  }
  node.disks = std::move(disks);
  node.installed = pkg::InstalledSet(spec.base_packages.packages);
  node.config_marks.clear();
  node.settings.clear();
  node.secrets.clear();
  node.applied_profile_generation = 0;
  node.applied_profile_digest.clear();

  if (services != nullptr) {
    try {
      secure::KeyHandle key = services->fetch_private_key(node.name);
      for (const secure::EncryptedSecret& blob :
           services->fetch_secrets(node.name)) {
        try {
          node.secrets[blob.label] = services->decrypt(key, blob);
        } catch (const Error& e) {
          node.record_error("secret '" + blob.label + "': " + e.what());
        }
      }
    } catch (const Error& e) {
      node.record_error(std::string("secure bootstrap: ") + e.what());
    }
  }

  node.state.transition(Phase::AwaitingFirstBoot);
  node.state.firstboot_hook_armed = true;
}

// Runs every registered component against the profile. A component whose
// mark already matches the profile generation is skipped unless forced;
// failures are recorded and do not stop the remaining components.
inline bool run_components(VirtualNode& node,
                           const config::ProfileTree& profile,
                           const ComponentRegistry& registry,
                           bool force = false) {
  bool all_ok = true;
  for (const Component& comp : registry.all()) {
    auto mark = node.config_marks.find(comp.name);
    if (!force && mark != node.config_marks.end() &&
        mark->second == profile.generation) {
      continue;
    }
    try {
      comp.apply(profile, node);
      node.config_marks[comp.name] = profile.generation;
    } catch (const std::exception& e) {
      node.record_error("component " + comp.name + ": " + e.what());
      all_ok = false;
    }
  }
  return all_ok;
}

namespace detail {

// Fetch profile, make the package set exactly match it, run components.
// Errors are recorded on the node; returns whether every step was clean.
inline bool converge(VirtualNode& node, NodeServices& services,
                     const ComponentRegistry& registry) {
  config::ProfileTree profile;
  try {
    profile = services.fetch_profile(node.name);
  } catch (const std::exception& e) {
    node.record_error(std::string("profile fetch: ") + e.what());
    return false;
  }

  try {
    pkg::DesiredList desired = desired_from_profile(profile);
    pkg::ReconcilePlan plan = pkg::plan(desired, node.installed);
    for (const pkg::Action& a : plan.actions) {
      if (a.kind != pkg::Action::Kind::Remove) services.fetch_package(a.to);
    }
    node.installed = pkg::apply(plan, node.installed);
  } catch (const std::exception& e) {
    node.record_error(std::string("package reconcile: ") + e.what());
    return false;
  }

  node.applied_profile_generation = profile.generation;
  node.applied_profile_digest = config::profile_content_digest(profile);
  return run_components(node, profile, registry);
}

}  // namespace detail

// The run-once hook after the first reboot: completes the installation
// and disables itself, success or not.
inline bool first_boot(VirtualNode& node, NodeServices& services,
                       const ComponentRegistry& registry) {
  if (node.phase() != Phase::AwaitingFirstBoot || !node.state.firstboot_hook_armed) {
    throw Error("ILLEGAL_PHASE",
                "first_boot requires an armed node awaiting first boot");
  }
  node.state.boot_count += 1;
  node.state.transition(Phase::Configuring);  // also disarms the hook
  if (!detail::converge(node, services, registry)) return false;
  node.state.transition(Phase::Production);
  return true;
}

// In-place update: same convergence pipeline as an install, no wipe. A
// node stuck in configuring may retry this way and reach production; a
// node under intervention converges but stays where it is until the
// rundown hands it back.
inline bool update_in_place(VirtualNode& node, NodeServices& services,
                            const ComponentRegistry& registry) {
  if (node.phase() != Phase::Production &&
      node.phase() != Phase::Configuring &&
      node.phase() != Phase::Intervention) {
    throw Error("ILLEGAL_PHASE",
                "update requires production, configuring or intervention");
  }
  bool ok = detail::converge(node, services, registry);
  if (ok && node.phase() == Phase::Configuring) {
    node.state.transition(Phase::Production);
  }
  return ok;
}

inline void reboot(VirtualNode& node, NodeServices& services,
                   const ComponentRegistry& registry) {
  switch (node.phase()) {
    case Phase::AwaitingFirstBoot:
      first_boot(node, services, registry);
      return;
    case Phase::Configuring:
    case Phase::Production:
    case Phase::Draining:
    case Phase::Intervention:
      node.state.boot_count += 1;
      return;
    default:
      throw Error("ILLEGAL_PHASE", std::string("cannot reboot a node in ") +
                                       phase_name(node.phase()));
  }
}

inline void fail(VirtualNode& node) { node.state.transition(Phase::Down); }

// Digest of the reproducible machine state: the package set, preserved
// data disks, the applied profile content and the component marks.
// Deliberately excluded: boot counter, key material and secrets (fresh
// per install), transient disk content, the error log.
inline std::string state_digest(const VirtualNode& node) {
  util::DigestBuilder b;
  b.add("pkg");
  for (const pkg::PackageSpec& p : node.installed.sorted()) {
    b.add(p.name).add(p.version).add(p.release).add(p.arch);
  }
  b.add("disk");
  for (const auto& [mount, d] : node.disks) {
    b.add(mount);
    b.add(d.preserve ? "p" : "t");
    if (d.preserve) b.add(d.data_digest);
  }
  b.add("prof");
  b.add(node.applied_profile_digest);
  b.add("mark");
  for (const auto& [comp, gen] : node.config_marks) {
    b.add(comp).add(std::to_string(gen));
  }
  return b.hex();
}

}  // namespace fab::node
