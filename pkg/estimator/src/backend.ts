import * as tf from "@tensorflow/tfjs";

let ready: Promise<string> | undefined;

/**
 * Initialize the fastest available tfjs backend, preferring WASM and falling
 * back to the pure-JS CPU backend. Safe to call repeatedly; the backend is
 * selected once per process.
 */
export function initBackend(): Promise<string> {
    if (!ready) {
        ready = (async () => {
            try {
                require("@tensorflow/tfjs-backend-wasm");
                const ok = await tf.setBackend("wasm");
                if (!ok) {
                    throw new Error("wasm backend rejected");
                }
            } catch {
                await tf.setBackend("cpu");
            }
            await tf.ready();
            return tf.getBackend();
        })();
    }
    return ready;
}
