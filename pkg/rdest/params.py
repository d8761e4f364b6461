# Copyright 2026 The rdest Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Parameter table utility code.

Parameters are named by '/'-separated paths such as 'g/conv1/kernel'. The
table stores them in nested namespaces, one level per path component.
"""

from . import tensor


class Error(KeyError):

    """Exception raised when a name is duplicated or not found."""


class Parameter(object):

    """Named tensor owned by a network."""

    def __init__(self, name, data, trainable=True):
        self.name = name
        self.tensor = tensor.Tensor(data, requires_grad=trainable)
        self.trainable = trainable

    @property
    def data(self):
        return self.tensor.data

    @property
    def grad(self):
        return self.tensor.grad

    @property
    def shape(self):
        return self.tensor.shape

    @property
    def size(self):
        return self.tensor.data.size

    def __str__(self):
        return 'Parameter({}, {})'.format(self.name, self.shape)

    __repr__ = __str__


class ParameterTable(object):

    """Parameter table that keeps insertion order and unique names."""

    def __init__(self):
        self.namespaces = {}
        self._order = []

    def _lookup_namespace(self, parts):
        """Helper that returns the namespace dict holding parts, or None.

        Args:
          parts: ['namespace', 'path']
        """
        namespace = self.namespaces
        for part in parts:
            namespace = namespace.get(part)
            if not isinstance(namespace, dict):
                return None
        return namespace

    def add_parameter(self, parameter):
        """Adds parameter under its name path.

        Raises:
          Error if the name is already taken or one of its namespace
          components names a parameter.
        """
        parts = parameter.name.split('/')
        namespace = self.namespaces
        for part in parts[:-1]:
            namespace = namespace.setdefault(part, {})
            if not isinstance(namespace, dict):
                raise Error('{} is nested under a parameter'.format(
                    parameter.name))
        if parts[-1] in namespace:
            raise Error('{} already defined'.format(parameter.name))
        namespace[parts[-1]] = parameter
        self._order.append(parameter)
        return parameter

    def lookup(self, name):
        """Returns the Parameter called name.

        Raises:
          Error if the parameter cannot be found.
        """
        parts = name.split('/')
        namespace = self._lookup_namespace(parts[:-1])
        if namespace is not None:
            found = namespace.get(parts[-1])
            if isinstance(found, Parameter):
                return found
        raise Error('{} not found'.format(name))

    def parameters(self, trainable_only=False):
        if trainable_only:
            return [p for p in self._order if p.trainable]
        return list(self._order)

    def names(self):
        return [p.name for p in self._order]

    def count(self, prefix=''):
        """Number of scalar entries of the parameters under prefix."""
        if prefix and not prefix.endswith('/'):
            prefix += '/'
        return sum(p.size for p in self._order if p.name.startswith(prefix))

    def __contains__(self, name):
        try:
            self.lookup(name)
        except Error:
            return False
        return True

    def __iter__(self):
        return iter(self._order)

    def __len__(self):
        return len(self._order)
