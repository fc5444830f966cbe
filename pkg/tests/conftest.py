import random
from pathlib import Path

import pytest

from sdx.config import (AclRuleConfig, DatapathConfig, FabricConfig, InterfaceConfig,
                        VlanConfig, parse_config)

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def mirror_yaml() -> str:
    return (DATA / "fig_mirror.yaml").read_text()


@pytest.fixture()
def mirror_cfg(mirror_yaml) -> FabricConfig:
    return parse_config(mirror_yaml)


def random_config(rng: random.Random) -> FabricConfig:
    """Generate a random valid FabricConfig (shared property-test generator).

    Every datapath carries at least ports 1..4 so mirror/redirect targets in
    {1..4} satisfy the every-referencing-datapath invariant by construction.
    """
    n_vlans = rng.randint(1, 3)
    vlans = {}
    vids = rng.sample(range(1, 4095), n_vlans)
    for i in range(n_vlans):
        name = f"vlan{i}"
        vlans[name] = VlanConfig(name=name, vid=vids[i],
                                 description=rng.choice(["", "tenant net", "research \"x\""]))
    vlan_names = list(vlans)

    acls = {}
    for i in range(rng.randint(0, 3)):
        rules = []
        for _ in range(rng.randint(1, 3)):
            dl_type = rng.choice([None, 0x800, 0x86DD, 0x806])
            ip_proto = None
            if dl_type in (0x800, 0x86DD) and rng.random() < 0.6:
                ip_proto = rng.choice([1, 6, 17, 58])
            allow = rng.random() < 0.5
            mirror = rng.choice([None, rng.randint(1, 4)])
            redirect = None
            if not allow and rng.random() < 0.3:
                redirect = rng.randint(1, 4)
            rules.append(AclRuleConfig(dl_type=dl_type, ip_proto=ip_proto, allow=allow,
                                       mirror=mirror, redirect=redirect))
        acls[f"acl{i}"] = tuple(rules)
    acl_names = list(acls)

    dps = {}
    dpids = rng.sample(range(1, 1 << 32), rng.randint(1, 2))
    for i, dp_id in enumerate(dpids):
        name = f"sw{i}"
        n_ports = rng.randint(4, 6)
        interfaces = {}
        for port in range(1, n_ports + 1):
            acls_in = ()
            if acl_names and rng.random() < 0.4:
                acls_in = tuple(rng.sample(acl_names, rng.randint(1, len(acl_names))))
            interfaces[port] = InterfaceConfig(
                native_vlan=rng.choice(vlan_names),
                name=f"AS{port}" if rng.random() < 0.7 else "",
                description=rng.choice(["", f"port {port}"]),
                acls_in=acls_in)
        dps[name] = DatapathConfig(name=name, dp_id=dp_id,
                                   hardware=rng.choice(["", "Open vSwitch"]),
                                   interfaces=interfaces)

    return FabricConfig(vlans=vlans, dps=dps, acls=acls)
