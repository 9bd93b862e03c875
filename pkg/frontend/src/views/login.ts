/** Local-token login; external-assertion logins redirect to the bridge. */

export interface LoginHandlers {
  onLogin(user: string, token: string): void;
}

export function renderLogin(container: HTMLElement, handlers: LoginHandlers, error = ''): void {
  container.textContent = '';

  const box = document.createElement('div');
  box.className = 'login-box';
  const title = document.createElement('h1');
  title.textContent = 'gridscope';
  box.appendChild(title);

  if (error) {
    const banner = document.createElement('p');
    banner.className = 'login-error';
    banner.textContent = error;
    box.appendChild(banner);
  }

  const form = document.createElement('form');
  form.className = 'login-form';
  const userLabel = document.createElement('label');
  userLabel.textContent = 'User';
  const user = document.createElement('input');
  user.name = 'user';
  user.autocomplete = 'username';
  userLabel.appendChild(user);
  form.appendChild(userLabel);

  const tokenLabel = document.createElement('label');
  tokenLabel.textContent = 'Access token';
  const token = document.createElement('input');
  token.name = 'token';
  token.type = 'password';
  token.autocomplete = 'current-password';
  tokenLabel.appendChild(token);
  form.appendChild(tokenLabel);

  const submit = document.createElement('button');
  submit.type = 'submit';
  submit.className = 'action submit';
  submit.textContent = 'Sign in';
  form.appendChild(submit);

  form.addEventListener('submit', (event) => {
    event.preventDefault();
    handlers.onLogin(user.value, token.value);
  });
  box.appendChild(form);

  const sso = document.createElement('a');
  sso.className = 'sso-stub';
  sso.href = '#/login';
  sso.textContent = 'Institutional sign-in (via identity bridge)';
  box.appendChild(sso);

  container.appendChild(box);
}
