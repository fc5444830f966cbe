/** The peering wizard: VLAN -> switch -> interfaces -> ACLs -> apply.
 * Collected in that order by the editor view; submitted in dependency order
 * (ACLs before the interfaces that reference them) because the server
 * validates every staged mutation incrementally. */

import type { AclRuleBody, ApiClient, ApplyReport, InterfaceBody, VlanBody } from "./api.js";

export interface PeeringDraft {
  vlan: VlanBody;
  datapath: { name: string; dp_id: number; hardware?: string };
  interfaces: InterfaceBody[];
  acls: { name: string; rules: AclRuleBody[] }[];
}

export function mirrorAclRules(toPort: number): AclRuleBody[] {
  return [
    { match: { dl_type: 0x800, ip_proto: 1 }, actions: { allow: false, mirror: toPort } },
    { match: { dl_type: 0x86dd, ip_proto: 58 }, actions: { allow: false, mirror: toPort } },
  ];
}

export function allowAllRules(): AclRuleBody[] {
  return [{ match: {}, actions: { allow: true } }];
}

export function blockRules(dlType?: number, ipProto?: number): AclRuleBody[] {
  const match: AclRuleBody["match"] = {};
  if (dlType !== undefined) match.dl_type = dlType;
  if (ipProto !== undefined) match.ip_proto = ipProto;
  return [{ match, actions: { allow: false } }];
}

export function redirectRules(toPort: number, dlType?: number,
                              ipProto?: number): AclRuleBody[] {
  const match: AclRuleBody["match"] = {};
  if (dlType !== undefined) match.dl_type = dlType;
  if (ipProto !== undefined) match.ip_proto = ipProto;
  return [{ match, actions: { allow: false, redirect: toPort } }];
}

/** Stage the draft object by object, then apply. Returns the ApplyReport. */
export async function submitPeeringDraft(api: ApiClient,
                                         draft: PeeringDraft): Promise<ApplyReport> {
  await api.createVlan(draft.vlan);
  await api.createDatapath({ name: draft.datapath.name, dp_id: draft.datapath.dp_id,
                             hardware: draft.datapath.hardware });
  for (const iface of draft.interfaces) {
    await api.createInterface(draft.datapath.name, { ...iface, acls_in: [] });
  }
  for (const acl of draft.acls) {
    await api.createAcl(acl.name, acl.rules);
  }
  for (const iface of draft.interfaces) {
    if (iface.acls_in && iface.acls_in.length) {
      await api.putInterface(draft.datapath.name, iface);
    }
  }
  return api.applyConfig();
}
