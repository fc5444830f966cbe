/** Typed client over the admin HTTP API. All state lives server-side; this
 * module only shapes requests and decodes responses. */

export interface Endpoint {
  host: string;
  port: number;
  listening: boolean;
}

export interface StatusPayload {
  endpoints: Record<string, Endpoint>;
  roles: Record<string, boolean>;
  cpu_percent: number;
  resident_memory_bytes: number;
  virtual_memory_bytes: number;
  sessions: Record<string, { state: string; dp_id: string | null;
                             last_echo_rtt_ms: number | null; fingerprint: string }>;
}

export interface VlanBody {
  name: string;
  vid: number;
  description?: string;
}

export interface AclRuleBody {
  match: { dl_type?: number; ip_proto?: number };
  actions: { allow: boolean; mirror?: number; redirect?: number };
}

export interface InterfaceBody {
  port: number;
  name?: string;
  description?: string;
  native_vlan: string;
  acls_in?: string[];
}

export interface DatapathBody {
  name: string;
  dp_id: number;
  hardware?: string;
  interfaces?: Record<string, Omit<InterfaceBody, "port">>;
}

export interface ConfigPayload {
  staged: unknown;
  active: unknown;
  dirty: boolean;
  staged_fingerprint: string;
  active_fingerprint: string;
}

export interface ApplyReport {
  per_dp: Record<string, { added: number; removed: number; deferred: boolean }>;
  deferred: string[];
  failed: string[];
  duration: number;
  fingerprint: string;
}

export interface RatePayload {
  bits_in_per_sec: number;
  bits_out_per_sec: number;
  pkts_in_per_sec: number;
  pkts_out_per_sec: number;
  window_seconds: number;
}

export interface PortStatsPayload {
  dp: string;
  port: number;
  window: number;
  rates: RatePayload;
  samples: Record<string, [number, number][]>;
}

export interface MePayload {
  username: string;
  role: string;
  ports: { dp: string; port: number }[];
}

export class ApiError extends Error {
  constructor(public status: number, public code: string, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(public base: string, public token: string) {}

  private async request(method: string, path: string, body?: unknown,
                        contentType = "application/json"): Promise<unknown> {
    const headers: Record<string, string> = { Authorization: `Bearer ${this.token}` };
    let payload: string | undefined;
    if (body !== undefined) {
      headers["Content-Type"] = contentType;
      payload = typeof body === "string" ? body : JSON.stringify(body);
    }
    const resp = await fetch(this.base + path, { method, headers, body: payload });
    if (resp.status === 204) return null;
    const text = await resp.text();
    const isJson = (resp.headers.get("Content-Type") ?? "").includes("json");
    const decoded = isJson && text ? JSON.parse(text) : text;
    if (!resp.ok) {
      const err = (decoded as { error?: { code?: string; message?: string } }).error ?? {};
      throw new ApiError(resp.status, err.code ?? "http", err.message ?? resp.statusText);
    }
    return decoded;
  }

  me(): Promise<MePayload> {
    return this.request("GET", "/me") as Promise<MePayload>;
  }

  status(): Promise<StatusPayload> {
    return this.request("GET", "/status") as Promise<StatusPayload>;
  }

  config(): Promise<ConfigPayload> {
    return this.request("GET", "/config") as Promise<ConfigPayload>;
  }

  configYaml(version: "staged" | "active" = "staged"): Promise<string> {
    return this.request("GET", `/config/yaml?version=${version}`) as Promise<string>;
  }

  putConfigYaml(text: string): Promise<unknown> {
    return this.request("PUT", "/config/yaml", text, "text/x-yaml");
  }

  validateConfig(): Promise<{ ok: boolean; violations: unknown[] }> {
    return this.request("POST", "/config/validate") as
      Promise<{ ok: boolean; violations: unknown[] }>;
  }

  applyConfig(): Promise<ApplyReport> {
    return this.request("POST", "/config/apply") as Promise<ApplyReport>;
  }

  createVlan(body: VlanBody): Promise<unknown> {
    return this.request("POST", "/vlans", body);
  }

  createDatapath(body: DatapathBody): Promise<unknown> {
    return this.request("POST", "/datapaths", body);
  }

  createAcl(name: string, rules: AclRuleBody[]): Promise<unknown> {
    return this.request("POST", "/acls", { name, rules });
  }

  putInterface(dp: string, body: InterfaceBody): Promise<unknown> {
    return this.request("PUT", `/datapaths/${dp}/interfaces/${body.port}`, body);
  }

  createInterface(dp: string, body: InterfaceBody): Promise<unknown> {
    return this.request("POST", `/datapaths/${dp}/interfaces`, body);
  }

  deleteObject(kind: "vlans" | "datapaths" | "acls" | "users", name: string): Promise<unknown> {
    return this.request("DELETE", `/${kind}/${name}`);
  }

  users(): Promise<{ users: (MePayload & { token: string })[] }> {
    return this.request("GET", "/users") as
      Promise<{ users: (MePayload & { token: string })[] }>;
  }

  createUser(body: { username: string; role: string; token?: string;
                     ports?: { dp: string; port: number }[] }): Promise<unknown> {
    return this.request("POST", "/users", body);
  }

  portStats(dp: string, port: number, window = 60): Promise<PortStatsPayload | null> {
    return this.request("GET", `/stats/ports?dp=${encodeURIComponent(dp)}` +
      `&port=${port}&window=${window}`) as Promise<PortStatsPayload | null>;
  }
}
