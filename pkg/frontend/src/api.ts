// Typed client for the inference service. The base URL can be set at
// runtime via window.MEDVQA_API_URL or a ?api= query parameter; it
// defaults to same-origin.

export interface AskRequest {
  question: string;
  image?: string; // base64-encoded bytes
  image_id?: string;
}

export interface AskResponse {
  answer: string;
  qtype: 'yes_no' | 'others';
  margin: number;
  step_confidences: number[];
  latency_ms: number;
}

export interface HealthResponse {
  status: string;
  mode?: string;
  backbone_tag?: string;
}

export class ServiceError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
  get retryable(): boolean {
    return this.status === 503;
  }
}

export function apiBaseUrl(): string {
  const fromQuery = new URLSearchParams(window.location.search).get('api');
  if (fromQuery) return fromQuery.replace(/\/$/, '');
  const fromGlobal = (window as unknown as Record<string, unknown>)['MEDVQA_API_URL'];
  if (typeof fromGlobal === 'string') return fromGlobal.replace(/\/$/, '');
  return '';
}

async function errorFrom(res: Response): Promise<ServiceError> {
  let message = `service returned ${res.status}`;
  try {
    const body = await res.json();
    if (body && typeof body.error === 'string') message = body.error;
  } catch {
    // non-JSON error body; keep the status message
  }
  return new ServiceError(res.status, message);
}

export async function ask(request: AskRequest, baseUrl = apiBaseUrl()): Promise<AskResponse> {
  const res = await fetch(`${baseUrl}/v1/ask`, {
    method: 'POST',
    headers: { 'Content-Type': 'application/json' },
    body: JSON.stringify(request),
  });
  if (!res.ok) throw await errorFrom(res);
  return (await res.json()) as AskResponse;
}

export async function health(baseUrl = apiBaseUrl()): Promise<HealthResponse> {
  const res = await fetch(`${baseUrl}/v1/health`);
  if (!res.ok) throw await errorFrom(res);
  return (await res.json()) as HealthResponse;
}

export function fileToBase64(file: Blob): Promise<string> {
  return new Promise((resolve, reject) => {
    const reader = new FileReader();
    reader.onload = () => {
      const url = reader.result as string;
      resolve(url.slice(url.indexOf(',') + 1));
    };
    reader.onerror = () => reject(reader.error);
    reader.readAsDataURL(file);
  });
}
