// The ask flow as a pure state transition around an injected transport,
// so the no-request guards and error handling are testable headlessly.

import { AskRequest, AskResponse, ServiceError } from './api';
import { appendAnswer, canAsk, SessionState, setError } from './state';

export type AskFn = (request: AskRequest) => Promise<AskResponse>;

export interface AskOutcome {
  state: SessionState;
  sent: boolean;
}

export async function performAsk(state: SessionState, askFn: AskFn): Promise<AskOutcome> {
  if (!canAsk(state)) {
    return { state, sent: false };
  }
  const question = state.question.trim();
  const inFlight: SessionState = { ...state, pending: true, lastError: null };
  try {
    const response = await askFn({
      question,
      image: inFlight.imageBase64 ?? undefined,
    });
    return { state: appendAnswer({ ...inFlight, pending: false }, question, response), sent: true };
  } catch (err) {
    const retryable = err instanceof ServiceError && err.retryable;
    const message = err instanceof Error ? err.message : 'request failed';
    return {
      state: setError({ ...inFlight, pending: false }, question, message, retryable),
      sent: true,
    };
  }
}
