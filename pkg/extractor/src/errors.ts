export class ModelLoadError extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'ModelLoadError';
  }
}

export class AttentionUnavailable extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'AttentionUnavailable';
  }
}

export class ShapeMismatch extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'ShapeMismatch';
  }
}

/** Any violation of the ADTP v1 byte layout found while reading or writing. */
export class FormatError extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'FormatError';
  }
}
