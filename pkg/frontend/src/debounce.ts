export interface Debounced<A extends unknown[]> {
  (...args: A): void;
  cancel(): void;
  flush(): void;
}

/** Trailing-edge debounce; 80 ms keeps the drag loop interactive while bounding request rate. */
export function debounce<A extends unknown[]>(fn: (...args: A) => void, wait = 80): Debounced<A> {
  let timer: ReturnType<typeof setTimeout> | undefined;
  let pending: A | undefined;

  const call = (...args: A) => {
    pending = args;
    if (timer !== undefined) clearTimeout(timer);
    timer = setTimeout(() => {
      timer = undefined;
      const held = pending as A;
      pending = undefined;
      fn(...held);
    }, wait);
  };
  call.cancel = () => {
    if (timer !== undefined) clearTimeout(timer);
    timer = undefined;
    pending = undefined;
  };
  call.flush = () => {
    if (timer === undefined) return;
    clearTimeout(timer);
    timer = undefined;
    const held = pending as A;
    pending = undefined;
    fn(...held);
  };
  return call;
}
